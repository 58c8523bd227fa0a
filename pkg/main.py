import sys
from colorama import init

from cli.commands import main

# Initialize colorama for colored terminal output
init()

if __name__ == "__main__":
    sys.exit(main())
