import sys

from gaussian_observables.configuration import initialize_logging
from gaussian_observables.cli import main

logger = initialize_logging("./config/logging.yaml")

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Exiting")
        sys.exit(0)
