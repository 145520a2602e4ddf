//! Closed forms for the monitored qubit and the monitored hopping particle,
//! plus the Bessel toolkit they rely on.

pub mod bessel;
pub mod hopping;
pub mod qubit;
