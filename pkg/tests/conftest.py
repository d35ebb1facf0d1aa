"""pytest configuration module for psy-enrich."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


def pytest_addoption(parser):
    group = parser.getgroup("psy-enrich", "psy-enrich specific options")
    group.addoption(
        "--acceptance",
        help=(
            "Run the long acceptance tests on full sized synthetic corpora "
            "instead of the scaled-down versions"
        ),
        action="store_true",
    )


def pytest_configure(config):
    import matplotlib

    import _base_testing as bt

    matplotlib.use("Agg")
    bt.acceptance = config.getoption("acceptance")
