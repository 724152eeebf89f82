import logging
import sys

from src import cli

# --- INITIALIZATION ---

def configure_logging(level: str):
    """Root logger setup; library modules only ever call getLogger(__name__)."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    args = cli.build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return cli.run_command(args)


if __name__ == "__main__":
    sys.exit(main())
