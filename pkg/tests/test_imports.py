"""Imports every module under src, and checks each subcommand's runner
exposes the runner interface.
"""
import unittest
import os
import helper  # noqa
from importlib import import_module

from main import SUBCOMMANDS


class Test(unittest.TestCase):
    def test_import_all(self):
        for rootp, _, files in os.walk('src'):
            for f in files:
                if not f.endswith('.py'):
                    continue
                fullpath = os.path.join(rootp, f)
                modpath = fullpath[4:-3].replace(os.path.sep, '.')
                with self.subTest(module=modpath):
                    import_module(modpath)

    def test_runners(self):
        for name, modnm in SUBCOMMANDS.items():
            mod = import_module(modnm)
            self.assertTrue(callable(getattr(mod, 'add_arguments', None)), name)
            self.assertTrue(callable(getattr(mod, 'main', None)), name)
            self.assertTrue(mod.__doc__, name)


if __name__ == '__main__':
    unittest.main()
