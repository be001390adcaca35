use isac_core::channel::{apply_channel, noise_variance, sample_eva_channel, tf_channel, ChannelPath, ChannelRealization};
use isac_core::comm::{
    ber, build_equivalent_rs, cancel_and_equalize, data_symbols, estimate_channel, nmse_db, qam16_demodulate,
    ChannelEstimate, CsiSource, QamFrame, Refinement, RsMask,
};
use isac_core::geometry::doppler_from_velocity;
use isac_core::pilot::build_pilot;
use isac_core::sensing::{detect, DetectionConfig, PeakNeighbourhood};
use isac_core::sequence::m_sequence_for_length;
use isac_core::transform::{isfft, ofdm_demodulate, ofdm_modulate, sfft, superimpose};
use isac_core::{FrameGeometry, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pilot_for(geom: &FrameGeometry) -> isac_core::pilot::Pilot2D {
    let a = m_sequence_for_length(geom.n(), 0).unwrap();
    let b = m_sequence_for_length(geom.m(), 1).unwrap();
    build_pilot(&a, &b, geom).unwrap()
}

#[test]
fn diagonal_neighbours_are_both_detected() {
    let geom = FrameGeometry::new(64, 64, 60e3, 8).unwrap();
    let pilot = pilot_for(&geom);
    let x = isfft(pilot.matrix(), &geom).unwrap();
    let g = C64::from_polar(0.7, 0.4);
    let paths = vec![ChannelPath::new(g, 2.0, 10.0), ChannelPath::new(g * C64::new(0.0, 1.0), 3.0, 11.0)];
    let ch = ChannelRealization::new(paths, geom);
    let y = apply_channel(&ofdm_modulate(&x, &geom).unwrap(), &ch).unwrap();
    let r = sfft(&ofdm_demodulate(&y, &geom).unwrap(), &geom).unwrap();

    let cfg = DetectionConfig::for_geometry(&geom);
    let mut found: Vec<_> = detect(&r, &pilot, &cfg, &geom)
        .unwrap()
        .detections
        .iter()
        .map(|d| (d.doppler, d.delay))
        .collect();
    found.sort_unstable();
    assert_eq!(found, vec![(10, 2), (11, 3)]);

    let full = DetectionConfig {
        neighbourhood: PeakNeighbourhood::Full,
        ..cfg
    };
    assert_eq!(detect(&r, &pilot, &full, &geom).unwrap().detections.len(), 1);
}

#[test]
fn underlaid_pilot_is_removed_before_demapping() {
    let geom = FrameGeometry::new(64, 16, 60e3, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rs = RsMask::comb(&geom, 4, &[0, 8], 7).unwrap();
    let frame = QamFrame::random(&mut rng, &rs).unwrap();
    let pilot_tf = isfft(pilot_for(&geom).matrix(), &geom).unwrap();
    let rho = 0.2;
    let x = superimpose(&pilot_tf, frame.grid(), rho).unwrap();
    let ch = sample_eva_channel(3, doppler_from_velocity(30.0, 6e9), &geom).unwrap();
    let y = ofdm_demodulate(&apply_channel(&ofdm_modulate(&x, &geom).unwrap(), &ch).unwrap(), &geom).unwrap();
    let h = tf_channel(&ch, &geom).unwrap();
    let sent_pilot = pilot_tf.scaled(C64::new(rho.sqrt(), 0.0));

    let decode = |pilot: &isac_core::Grid| {
        let eq = cancel_and_equalize(&y, &ChannelEstimate::perfect(h.clone()), pilot, 0.0).unwrap();
        ber(frame.bits(), &qam16_demodulate(&data_symbols(&eq.symbols, &rs))).unwrap()
    };
    assert_eq!(decode(&sent_pilot), 0.0);
    // leaving the pilot in place corrupts the constellation
    assert!(decode(&pilot_tf.scaled(C64::new(0.0, 0.0))) > 0.01);
}

#[test]
fn equivalent_reference_tracks_the_channel() {
    let geom = FrameGeometry::new(64, 16, 60e3, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rs = RsMask::comb(&geom, 4, &[0, 8], 7).unwrap();
    let frame = QamFrame::random(&mut rng, &rs).unwrap();
    let pilot_tf = isfft(pilot_for(&geom).matrix(), &geom).unwrap();
    let sent_pilot = pilot_tf.scaled(C64::new(0.2f64.sqrt(), 0.0));
    let x = superimpose(&pilot_tf, frame.grid(), 0.2).unwrap();
    let ch = sample_eva_channel(8, doppler_from_velocity(30.0, 6e9), &geom).unwrap();
    let y = ofdm_demodulate(&apply_channel(&ofdm_modulate(&x, &geom).unwrap(), &ch).unwrap(), &geom).unwrap();
    let h = tf_channel(&ch, &geom).unwrap();

    let refs = build_equivalent_rs(&rs, frame.grid(), &sent_pilot, 0.2).unwrap();
    let var = noise_variance(f64::INFINITY, 1.0).unwrap();
    let with_pilot = estimate_channel(&y, &refs, CsiSource::EquivalentRs, Refinement::LeastSquares, var).unwrap();
    // noise-free: only interpolation error remains
    assert!(nmse_db(&with_pilot.h_tf, &h).unwrap() < -10.0);

    let plain = isac_core::comm::plain_rs(&rs);
    let ignorant = estimate_channel(&y, &plain, CsiSource::PilotIgnorantRs, Refinement::LeastSquares, var).unwrap();
    assert!(nmse_db(&ignorant.h_tf, &h).unwrap() > nmse_db(&with_pilot.h_tf, &h).unwrap() + 5.0);
}
