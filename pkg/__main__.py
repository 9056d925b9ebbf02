import argparse
import logging
import sys

from constants import AppConfig, ExitCodes


def setup_logging(quiet: bool = False):
    """Configure logging for the application."""
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


logger = logging.getLogger(__name__)


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(prog=AppConfig.APP_NAME, description=AppConfig.APP_DESCRIPTION)
    parser.add_argument('command', choices=AppConfig.COMMANDS, help='Experiment to run')
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', help='Experiment config file (JSON)')
    source.add_argument('--recipe', help='Name of a shipped figure recipe, e.g. fig1a')
    parser.add_argument('--out', help='Output CSV path; a key-value report is written next to it')
    parser.add_argument('--seed', type=int, help='Override the base seed of stochastic runs')
    parser.add_argument('--quiet', action='store_true', help='Only log warnings and errors')
    return parser.parse_args(argv)


def main(argv=None):
    """Main application entry point with error handling."""
    args = parse_arguments(argv)
    try:
        setup_logging(args.quiet)
        from controller import ExperimentController
        from view import ConsoleView
        controller = ExperimentController(ConsoleView(quiet=args.quiet))
        code = controller.run(args.command, config_path=args.config, recipe=args.recipe,
                              out=args.out, seed=args.seed)
    except ImportError as e:
        error_msg = f"Missing required dependency: {e}"
        logger.error(error_msg)
        print(f"Error: {error_msg}")
        print("Please ensure all required packages are installed.")
        code = ExitCodes.VALIDATION_ERROR
    except Exception as e:
        error_msg = f"Failed to run {args.command}: {e}"
        logger.error(error_msg)
        print(f"Error: {error_msg}")
        print("Please check the application logs for more details.")
        code = ExitCodes.NUMERICAL_FAILURE
    sys.exit(code)


if __name__ == '__main__':
    main()
