//! Selective state-space scan kernel and Mamba block, with explicit
//! save/restore state for chunk-wise streaming.

mod block;
pub mod params;
mod scan;
mod state;

pub use block::{bidirectional_scan, bidirectional_scan_ctx, mamba_block, mamba_block_ctx};
pub use params::{MambaLayerHandles, MambaLayerParams, DEFAULT_D_SSM, DEFAULT_KERNEL, DEFAULT_S_MAX};
pub use scan::{scan_with_trajectory, selective_scan};
pub use state::{restore_state, save_state, StreamState, STATE_MAGIC, STATE_VERSION};
