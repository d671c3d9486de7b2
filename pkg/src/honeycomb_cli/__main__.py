"""Allow running the CLI as: python -m honeycomb_cli."""

from honeycomb_cli.main import cli_main

if __name__ == "__main__":
    cli_main()
