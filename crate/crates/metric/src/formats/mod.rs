pub mod depth;
pub mod lengths;
pub mod ply;
pub mod pose;
pub mod split;
pub mod truth;
