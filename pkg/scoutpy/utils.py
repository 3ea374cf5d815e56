# -*- coding: utf-8 -*-
"""A scoutpy module that contains seeding, serialisation and data frame
utilities shared by the agent, metrics and command line modules.
"""

import json
import numpy as np
import pandas as pd
from . import log_util

logger = log_util.get_logger(__name__)

_rng_streams = ('init', 'train', 'act')


def spawn_rngs(seed):
    '''Splits one integer seed into independent generators for model
    initialisation, training and acting. Returns a dict keyed by stream.'''
    children = np.random.SeedSequence(seed).spawn(len(_rng_streams))
    return {
        name: np.random.default_rng(child)
        for name, child in zip(_rng_streams, children)}


def to_jsonable(value):
    '''Converts numpy scalars/arrays and tuples into plain JSON types.'''
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_ndjson(path, rows):
    '''Writes one JSON object per line with sorted keys, so identical rows
    always give identical bytes.'''
    with open(str(path), 'w') as dump_file:
        for row in rows:
            dump_file.write(json.dumps(to_jsonable(row), sort_keys=True) + '\n')
    logger.info('Wrote %s', path)


def read_ndjson(path):
    '''Reads the rows written by write_ndjson.'''
    with open(str(path)) as dump_file:
        return [json.loads(line) for line in dump_file if line.strip()]


def recast_df(df):
    '''Recasts a data frame so that count columns are integers and measured
    columns are floats before it is written to CSV'''
    int_fields = [
            'step',
            'steps',
            'unique_visited',
            'iters_used',
            'count',
            'state_id',
            'from_id',
            'to_id',
            'action',
            'row',
            'col',
            ]
    float_fields = [
            'coverage_fraction',
            'visited_once_fraction',
            'mean_r_intr',
            'L_Q', 'L_R', 'L_G', 'L_tau', 'L_d1', 'L_csc',
            'mean',
            'stderr',
            ]
    # Integer columns may hold gaps (e.g. no training at a step); keep those
    #   as pandas' nullable integer type.
    for int_field in int_fields:
        if int_field in df.columns:
            df[int_field] = df[int_field].astype('Int64')
    for float_field in float_fields:
        if float_field in df.columns:
            df[float_field] = df[float_field].astype(float)
    return df
