"""Domain-adaptive semantic segmentation with domain-specific normalization."""

from ._core import (
    IGNORE_INDEX,
    TrainConfig,
    argmax_map,
    bilinear_upsample,
    ce_kl_identity,
    cli,
    config_keys,
    conv2d,
    evaluate,
    fuse,
    generate_scene,
    gradient_suite,
    loss_adv,
    loss_dis,
    loss_seg,
    loss_st,
    miou,
    poly_lr,
    pseudo_label,
    softmax_channels,
    train,
)


def config(**overrides):
    """A TrainConfig with the given fields replaced."""
    cfg = TrainConfig()
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise AttributeError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


__all__ = [name for name in dir() if not name.startswith("_")]
