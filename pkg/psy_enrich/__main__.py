"""Run the psy-enrich command line interface with ``python -m psy_enrich``"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import sys

from psy_enrich.cli import main

if __name__ == "__main__":
    sys.exit(main())
