from __future__ import annotations

import sys

from thinlayer.harness import cli_main

if __name__ == "__main__":
    sys.exit(cli_main())
