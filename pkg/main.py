"""Process entrypoint, same as `python -m loomc`."""

from loomc.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
