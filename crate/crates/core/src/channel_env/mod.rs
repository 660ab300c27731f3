//! V2X world model: mobility, large/small-scale fading, interference,
//! link rates and payload delivery accounting.

mod env;
pub mod gains;
pub mod layout;
pub mod pathloss;
pub mod payload;
pub mod scenario;
pub mod sinr;

pub use env::{EnvSnapshot, Environment, SlotEvaluation};
pub use gains::{ChannelGains, LinkField};
pub use layout::{RoadLayout, VehicleState};
pub use pathloss::{pathloss_db, LinkGeometry, LinkType};
pub use payload::{success_probability, DeliveryEvent, PayloadTracker, Redelivery};
pub use scenario::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm, LaneGeometry, ScenarioConfig, ScenarioKind};
pub use sinr::{compute_rates, compute_sinr, Decision, LinkRates};
