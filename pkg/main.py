import sys
import logging

from src.cli.commands import main

if __name__ == "__main__":
    # Diagnostics go to stderr so stdout stays machine-readable
    logging.basicConfig(level=logging.WARNING,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                        handlers=[
                            logging.StreamHandler(sys.stderr)
                        ])

    sys.exit(main())
