//! From incident field to received symbols: the Rabi-frequency formula,
//! heterodyne mixing with a reference field, the quasi-static EIT receive
//! chain, and AM/FM/PM/FDM demodulation.

pub mod demod;
pub mod fdm;
pub mod field;
pub mod receive;

pub use demod::{
    bpsk_ber, calibrate_am_levels, demod_am, demod_fm, demod_pm, pilot_gain, pm_correlate,
    psk_decide, psk_point, qpsk_ser, symbol_means, FmMap, FmOutput, PmConfig, PmOutput,
};
pub use fdm::{fdm_demod, fdm_modulate, FdmChain, FdmGrid, FdmOutput};
pub use field::{
    heterodyne_linearized, heterodyne_superpose, rabi_from_field, FieldCoupling, FieldEnvelope,
    ReferenceField,
};
pub use receive::{
    evolve_receive, quasi_static_receive, BandwidthCheck, ReceiveMode, ReceiveOptions, Receiver,
    TransductionCurve, DEFAULT_OPERATING_RABI, QUASI_STATIC_FRACTION,
};
