"""
Output artifact management: deterministic JSON, CSV traces and sidecars
"""
import json
import math
from pathlib import Path

import numpy as np

from errors import ArtifactIOError
from logger import get_logger

logger = get_logger(__name__)


def format_float(value):
    """17 significant digits; enough for an exact float round trip"""
    return format(float(value), '.17g')


def _encode(obj, indent, level):
    pad = '\n' + ' ' * (indent * (level + 1)) if indent else ''
    close = '\n' + ' ' * (indent * level) if indent else ''
    sep = ',' + pad if indent else ','
    if isinstance(obj, dict):
        if not obj:
            return '{}'
        items = [f'{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}'
                 for k in sorted(obj, key=str)]
        return '{' + pad + sep.join(items) + close + '}'
    if isinstance(obj, (list, tuple, np.ndarray)):
        values = list(obj)
        if not values:
            return '[]'
        # numeric arrays stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in values):
            return '[' + ', '.join(_encode(v, 0, 0) for v in values) + ']'
        return '[' + pad + sep.join(_encode(v, indent, level + 1) for v in values) + close + ']'
    if isinstance(obj, (bool, np.bool_)):
        return 'true' if obj else 'false'
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return 'null'
        return format_float(obj)
    if obj is None:
        return 'null'
    return json.dumps(obj)


def dumps_json(obj, indent=2):
    """Deterministic JSON text: sorted keys, %.17g floats, non-finite as null"""
    return _encode(obj, indent, 0) + '\n'


class ArtifactStore:
    """Writes run artifacts under one output directory"""

    def __init__(self, out_dir, build_tag):
        self.out_dir = Path(out_dir)
        self.build_tag = build_tag

    def path_for(self, name):
        path = Path(name)
        return path if path.is_absolute() else self.out_dir / path

    def _envelope(self, config):
        config = dict(config or {})
        return {'build': self.build_tag, 'config': config, 'seed': config.get('seed')}

    def write_text(self, path, text):
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding='utf-8')
        except OSError as e:
            logger.error("Failed to write artifact", path=str(path), error=str(e))
            raise ArtifactIOError(f"cannot write {path}: {e}") from e
        return path

    def write_json(self, name, payload, config=None):
        """Write payload wrapped with {build, config, seed}"""
        document = self._envelope(config)
        document['payload'] = payload
        path = self.write_text(self.path_for(name), dumps_json(document))
        logger.info("Artifact written", path=str(path), kind='json')
        return path

    def write_csv(self, name, frame, config=None):
        """Write a pandas frame plus a `<name>.meta.json` sidecar"""
        path = self.path_for(name)
        text = frame.to_csv(index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')
        self.write_text(path, text)
        sidecar = path.with_name(path.stem + '.meta.json')
        self.write_text(sidecar, dumps_json(self._envelope(config)))
        logger.info("Artifact written", path=str(path), kind='csv', rows=len(frame))
        return path

    @staticmethod
    def read_json(path):
        path = Path(path)
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except OSError as e:
            raise ArtifactIOError(f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ArtifactIOError(f"{path} is not valid JSON: {e}") from e
