"""Training-free camera control for video diffusion, desk-scale edition.

Subpackages cover rigid geometry, camera trajectories, global point-map
alignment, DDIM scheduling, point-cloud reframing, masked latent
rehabilitation, pose metrics, a synthetic-scene oracle, and bit-exact
file formats.  The `camreframe` CLI exposes the pipeline end to end.
"""

__version__ = "0.1.0"
