//! Two-carrier QPSK floor: no third-order product lands in either band,
//! so the residual band power is pure spectral spill from the two
//! out-of-band products at 2f_1 - f_2 and 2f_2 - f_1. Quantified here:
//! with the default symbol rate (half the channel spacing) the floor sits
//! 20 dB below the weakest nonzero ACI reference, the N = 3 center level.

use im3_kit::qpsk::{measure_qpsk_aci, QpskConfig};
use im3_kit::{closed_form, ChannelPlan, NonlinearityModel};

#[test]
fn two_carrier_floor_is_20_db_below_three_carrier_center() {
    let plan = ChannelPlan::equal(2, 16.0, 1.0, 1.0).unwrap();
    let model = NonlinearityModel::cubic(1.0).unwrap();
    let (cfg, grid) = QpskConfig::default_for_plan(&plan, 1).unwrap();
    let report = measure_qpsk_aci(&plan, &model, &cfg, &grid).unwrap();

    let floor = report
        .per_channel_power
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let reference = closed_form::equal_power_aci(3, 2, 1.0, 1.0).unwrap();
    let margin_db = 10.0 * (reference / floor).log10();
    assert!(
        margin_db >= 20.0,
        "floor {floor} is only {margin_db:.2} dB below the N=3 center {reference}"
    );
    // The spill floor is physical, not numerical noise: it stays within a
    // factor of a few of the sinc-tail estimate.
    assert!(
        margin_db < 26.0,
        "floor suspiciously clean: {margin_db:.2} dB"
    );
}
