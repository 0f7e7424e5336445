"""Tests loading the configuration and applying command line overrides"""
import unittest
import helper  # noqa
import json
import os
import tempfile
from unittest import mock

from config import CONFIG_ENV_VAR, LOG_LEVEL_ENV_VAR, AppConfig, ConfigError, load_config
from main import apply_overrides, build_parser


class Test(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'config.json')

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, payload):
        with open(self.path, 'w', encoding='utf-8') as outfile:
            if isinstance(payload, str):
                outfile.write(payload)
            else:
                json.dump(payload, outfile)
        return self.path

    def test_defaults(self):
        config = AppConfig()
        self.assertEqual(config.pipeline.t_max, 3)
        self.assertEqual(config.pipeline.depth, 32)
        self.assertEqual(config.pipeline.verifier_view, 5)
        self.assertEqual(config.retrieval.k_rrf, 60)
        self.assertEqual(config.forge.delta, 0.8)
        self.assertEqual(config.dpo.beta, 0.1)
        self.assertEqual(config.medrank.k, 4)
        self.assertEqual(config.endpoints['verifier'].model_name, 'mock-verifier')

    def test_partial_file(self):
        config = load_config(self.write({'pipeline': {'t_max': 5}, 'parallelism': 3}))
        self.assertEqual(config.pipeline.t_max, 5)
        self.assertEqual(config.pipeline.depth, 32)
        self.assertEqual(config.parallelism, 3)

    def test_repository_config_matches_defaults(self):
        config = load_config(os.path.join('cfg', 'config.json'))
        self.assertEqual(config.pipeline, AppConfig().pipeline)
        self.assertEqual(config.endpoints, AppConfig().endpoints)

    def test_env_var(self):
        path = self.write({'log_level': 'DEBUG'})
        with mock.patch.dict(os.environ, {CONFIG_ENV_VAR: path}):
            self.assertEqual(load_config().log_level, 'DEBUG')

    def test_env_var_missing_file(self):
        with mock.patch.dict(os.environ, {CONFIG_ENV_VAR: os.path.join(self.tmp.name, 'absent.json')}):
            with self.assertRaises(ConfigError):
                load_config()

    def test_explicit_missing_file(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(os.path.join(self.tmp.name, 'absent.json'))
        self.assertEqual(ctx.exception.reason, 'file does not exist')

    def test_log_level_env_var(self):
        path = self.write({'log_level': 'DEBUG'})
        with mock.patch.dict(os.environ, {LOG_LEVEL_ENV_VAR: 'ERROR'}):
            self.assertEqual(load_config(path).log_level, 'ERROR')

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            load_config(self.write('{nope'))
        with self.assertRaises(ConfigError):
            load_config(self.write({'pipeline': {'t_max': 0}}))
        with self.assertRaises(ConfigError):
            load_config(self.write({'parallelism': 0}))
        with self.assertRaises(ConfigError):
            load_config(self.write({'forge': {'balance': 'global'}}))

    def overridden(self, *argv):
        args = build_parser().parse_args(['retrieve', '--q', 'x', *argv])
        return apply_overrides(AppConfig(), args)

    def test_depth_override_clamps_view(self):
        config = self.overridden('--depth', '3')
        self.assertEqual(config.pipeline.depth, 3)
        self.assertEqual(config.pipeline.verifier_view, 3)
        self.assertEqual(config.retrieval.depth, 3)

    def test_ablation_overrides(self):
        config = self.overridden('--no-iteration', '--no-mtam', '--no-retrieval', '--t-max', '2')
        self.assertFalse(config.pipeline.enable_iteration)
        self.assertFalse(config.pipeline.enable_mtam_verifier)
        self.assertFalse(config.pipeline.enable_retrieval)
        self.assertEqual(config.pipeline.t_max, 2)
        self.assertEqual(config.pipeline.active_verifier(), 'base_verifier')
        self.assertEqual(config.pipeline.rounds_allowed(), 0)

    def test_mock_and_parallelism_overrides(self):
        config = self.overridden('--mock', 'script.jsonl', '--parallelism', '4')
        self.assertEqual(config.gateway.mock_script, 'script.jsonl')
        self.assertEqual(config.parallelism, 4)
        self.assertEqual(AppConfig().gateway.mock_script, None)

    def test_invalid_overrides(self):
        with self.assertRaises(ConfigError):
            self.overridden('--t-max', '0')
        with self.assertRaises(ConfigError):
            self.overridden('--parallelism', '0')


if __name__ == '__main__':
    unittest.main()
