"""
Main application entry point for person-synth.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation failure.
"""
import sys
from typing import Optional, Sequence

from tool.synth_tool import run
from utils.exceptions import PersonSynthError, ValidationError
from utils.logger import get_logger

logger = get_logger("main")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and map failures to exit codes."""
    try:
        run(argv)
        return EXIT_OK
    except SystemExit as e:
        # argparse exits with 2 on bad usage and 0 on --help
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except ValidationError as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PersonSynthError as e:
        logger.error(str(e))
        print(f"Application error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        print(f"Unexpected error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
