pub mod nn;
pub mod scalar;
pub mod params;
pub mod sim;
pub mod agents;
pub mod cpdm;
pub mod cdrl;
pub mod control;
pub mod harness;

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Adam64 = nn::AdamState<f64>;
pub type Adam32 = nn::AdamState<f32>;
