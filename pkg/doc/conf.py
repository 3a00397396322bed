"""Sphinx configuration file for an LSST telescope and site package.

This configuration only affects single-package Sphinx documentation builds.
"""

import lsst.ts.fairpc  # noqa
from documenteer.conf.pipelinespkg import *  # type: ignore # noqa

project = "ts_fairpc"
html_theme_options["logotext"] = project  # type: ignore # noqa
html_title = project
html_short_title = project
doxylink = {}  # type: ignore # noqa

intersphinx_mapping["numpy"] = ("https://numpy.org/doc/stable", None)  # type: ignore # noqa
intersphinx_mapping["pandas"] = ("https://pandas.pydata.org/docs", None)  # type: ignore # noqa
