"""Small torch helpers shared by the model modules."""

import hashlib

import numpy as np
import torch


def tile_to_tensor(tile, dtype=torch.float32):
    """uint8 HxWx3 tile -> normalized 3xHxW tensor in roughly [-1, 1]."""
    arr = tile.pixels if hasattr(tile, "pixels") else np.asarray(tile)
    x = torch.from_numpy(np.ascontiguousarray(arr)).to(dtype) / 255.0
    return (x - 0.5).permute(2, 0, 1) / 0.29


def tiles_to_batch(tiles, dtype=torch.float32):
    return torch.stack([tile_to_tensor(t, dtype) for t in tiles])


def parameter_hash(module):
    """sha256 over all state-dict tensors; the freeze-contract fingerprint."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        arr = tensor.detach().cpu().numpy()
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def shape_manifest(module):
    """Parameter name -> shape map, stored next to checkpoints."""
    return {name: tuple(t.shape) for name, t in module.state_dict().items()}


def freeze(module):
    for p in module.parameters():
        p.requires_grad_(False)
    module.eval()
    return module
