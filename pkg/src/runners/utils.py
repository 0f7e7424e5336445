"""Generally useful functions for runners"""
from typing import Dict, Optional
import json
import os
import sys

from medrank.builder import read_stratification


def emit_json(payload):
    """Prints the payload to stdout as sorted, indented json"""
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2))
    sys.stdout.write('\n')
    sys.stdout.flush()


def write_json(path: str, payload):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as outfile:
        json.dump(payload, outfile, sort_keys=True, indent=2)
        outfile.write('\n')


def dataset_name(path: str) -> str:
    """The benchmark file name without its directory or extension"""
    return os.path.splitext(os.path.basename(path))[0]


def load_groups(path: Optional[str]) -> Dict[str, str]:
    """q_id to difficulty group from a stratification file, or nothing if no
    file was given"""
    if path is None:
        return {}
    stratification = read_stratification(path)
    return {record.q_id: record.group for record in stratification.records}


def finish(itgs):
    """Writes the gateway call log if one is configured. Only call this once
    the gateway has been used."""
    path = itgs.config.gateway.call_log
    if path is not None:
        itgs.gateway.write_call_log(path)
        itgs.logger.debug('Wrote {} gateway calls to {}', len(itgs.gateway.call_log()), path)
