use noisemap_demo::api::{classify, heatmap_round_trip, planted_dependence};

#[test]
fn legend_colors_classify_to_their_midpoints() {
    let c = classify("thessaloniki_neapoli", [255, 255, 0], 20.0).unwrap();
    assert_eq!(c.noise_db, Some(47.5));
    assert_eq!(c.bands.len(), 9);
    assert_eq!(c.bands[1].delta_e, 0.0);
    assert!(c.bands.iter().enumerate().all(|(i, b)| i == 1 || b.delta_e > 0.0));

    let grey = classify("kalamaria", [128, 128, 128], 5.0).unwrap();
    assert_eq!(grey.noise_db, None);
    assert!(classify("nowhere", [0, 0, 0], 20.0).is_err());
}

#[test]
fn unblended_heatmap_survives_the_round_trip() {
    let r = heatmap_round_trip("kalamaria", 48, 32, 5, false).unwrap();
    assert_eq!((r.classified, r.dropped, r.misclassified), (48 * 32, 0, 0));
    assert_eq!(r.rgba.len(), 48 * 32 * 4);
    assert_eq!(r.tiles, 48 * 32);
    assert_eq!(r.reduction, 0.0);

    let blended = heatmap_round_trip("kalamaria", 48, 32, 5, true).unwrap();
    assert_eq!(blended.classified + blended.dropped, 48 * 32);
    assert_eq!(blended, heatmap_round_trip("kalamaria", 48, 32, 5, true).unwrap());
}

#[test]
fn dependence_slope_follows_the_planted_sign() {
    let up = planted_dependence(11, 400.0, 300).unwrap();
    let down = planted_dependence(11, -400.0, 300).unwrap();
    assert!(up.fitted_slope > 0.0, "{}", up.fitted_slope);
    assert!(down.fitted_slope < 0.0, "{}", down.fitted_slope);
    assert_eq!(up.grid.len(), up.mean_prediction.len());
    assert!(planted_dependence(1, 100.0, 5).is_err());
}
