"""
sqrecompose.util.__main__:

Main entry point of the sqrecompose command line. Allows running 'python -m sqrecompose.util' as well as the
'sqrecompose' console script.
"""

import sys

import sqrecompose.util.cli


def main():
    """Run wrapper, to point a console_script at"""
    return sqrecompose.util.cli.utility_entry(args=sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
