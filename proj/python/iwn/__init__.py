"""DCT-domain watermarking with an idempotent restoration network."""

import os


def _blas_core_hint():
    # OpenBLAS misdetects some AVX-512 parts as a generic core and falls back
    # to very slow kernels; it reads this variable once, at load time.
    try:
        with open("/proc/cpuinfo") as f:
            flags = next((line for line in f if line.startswith("flags")), "")
    except OSError:
        return None
    if "avx512f" in flags and "avx512bw" in flags and "avx512vl" in flags:
        return "SkylakeX"
    if "avx2" in flags and "fma" in flags:
        return "Haswell"
    return None


if "OPENBLAS_CORETYPE" not in os.environ and _blas_core_hint():
    os.environ["OPENBLAS_CORETYPE"] = _blas_core_hint()

from ._iwn import (  # noqa: E402
    IwnError,
    Model,
    apply_attack,
    attack_names,
    count_parameters,
    dct2,
    embed,
    evaluate,
    extract,
    idct2,
    load_image,
    psnr,
    save_image,
    ssim,
    train,
)

__all__ = [
    "IwnError",
    "Model",
    "apply_attack",
    "attack_names",
    "count_parameters",
    "dct2",
    "embed",
    "evaluate",
    "extract",
    "idct2",
    "load_image",
    "psnr",
    "save_image",
    "ssim",
    "train",
]
