#!/usr/bin/env python3
"""Run the coupled Burgers' benchmark; see --help for flags."""

import sys

from adtape.cli import main

if __name__ == "__main__":
    sys.exit(main())
