//! The hierarchical encoder and its linear-aggregation baseline.

mod config;
mod encoder;
mod params;

pub use config::{default_schedule, Activation, AttentionMode, HmgeConfig};
pub use encoder::{
    attention_aggregate, combine_adjacencies, discriminate, encode, gcn_forward,
    linear_aggregation_encode, readout, BoundLayer, BoundLinear, BoundParams, Embedded, Encoder,
    ForwardTrace, Latent, LatentDim, LayerVars, TapeSparse, ATTENTION_GUARD,
};
pub use params::{
    softmax_columns, AttentionParams, HmgeParams, LayerParams, LinearParams, ParamFamily,
};
