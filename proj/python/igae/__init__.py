"""Latent-space neural fields with a 3D-aware autoencoder."""

from igae._core import (  # noqa: F401
    Autoencoder,
    AutoencoderSpec,
    CameraPose,
    ProceduralScene,
    Rng,
    Tensor,
    Vec3,
    add,
    cli_main,
    composite_rays,
    conv2d,
    encoder_fingerprint,
    exp,
    grid_sample_bilinear,
    linear,
    look_at_pose,
    make_scene,
    mean,
    mse,
    mul,
    psnr,
    relu,
    render_gt_view,
    sample_poses_on_sphere,
    scale,
    sigmoid,
    silu,
    softplus,
    square,
    ssim,
    sub,
    sum,
    tv_image,
    upsample_nearest2x,
)

__all__ = [name for name in dir() if not name.startswith("_")]
