//! Ingestion tests: file parsing, the three compatibility constructions,
//! group assignment, and archive round-trips.

use std::collections::BTreeSet;
use std::io::Write;

use fairbundle::archive::{load_catalog, save_catalog};
use fairbundle::ingest::{
    assign_groups_by_popularity, assign_groups_by_tag, build_catalog, copurchase_table,
    haversine_km, load_ratings, movie_compatibility, venue_compatibility, CompatRule, FilterSpec,
    GroupRule, ItemMetadata, RatingsFormat,
};
use fairbundle_core::synth::{synthetic_catalog, SyntheticCatalogSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::NamedTempFile;

fn write_file(content: &str) -> NamedTempFile {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

#[test]
fn ratings_parse_plain_rows() {
    let file = write_file("1,10,4.0\n2,11,3.5\n2,10,5.0\n");
    let (table, report) = load_ratings(file.path(), &RatingsFormat::default()).unwrap();
    assert_eq!(table.len(), 3);
    assert_eq!(report.malformed, 0);
    assert!(!report.header_skipped);
}

#[test]
fn ratings_skip_a_header_row() {
    let file = write_file("user,item,rating\n1,10,4.0\n2,11,3.5\n");
    let (table, report) = load_ratings(file.path(), &RatingsFormat::default()).unwrap();
    assert_eq!(table.len(), 2);
    assert!(report.header_skipped);
}

#[test]
fn duplicate_rating_rows_keep_the_last_value() {
    let file = write_file("1,10,4.0\n1,10,2.0\n");
    let (table, report) = load_ratings(file.path(), &RatingsFormat::default()).unwrap();
    assert_eq!(table.len(), 1);
    assert_eq!(report.duplicate_overwrites, 1);
    assert_eq!(table.entries()[0].2, 2.0);
}

#[test]
fn too_many_malformed_lines_reject_the_file() {
    // 1 bad line out of 3 data lines is over the 1% limit.
    let file = write_file("1,10,4.0\nnot,a,row\n2,11,3.5\n");
    assert!(load_ratings(file.path(), &RatingsFormat::default()).is_err());

    // The same bad line among 200 good ones is tolerated.
    let mut big = String::new();
    for i in 0..200 {
        big.push_str(&format!("{i},{},{:.1}\n", i + 1000, 1.0 + (i % 5) as f64));
    }
    big.push_str("not,a,row\n");
    let file = write_file(&big);
    let (table, report) = load_ratings(file.path(), &RatingsFormat::default()).unwrap();
    assert_eq!(table.len(), 200);
    assert_eq!(report.malformed, 1);
}

#[test]
fn ratings_support_other_delimiters_and_timestamps() {
    let file = write_file("1\t10\t4.0\t881250949\n2\t11\t3.0\t881250950\n");
    let (table, _) = load_ratings(file.path(), &RatingsFormat { delimiter: '\t' }).unwrap();
    assert_eq!(table.len(), 2);
}

fn movie(id: u64, year: i32, genres: &[&str]) -> ItemMetadata {
    ItemMetadata {
        id,
        year: Some(year),
        genres: Some(genres.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()),
        ..ItemMetadata::default()
    }
}

#[test]
fn movie_compatibility_matches_hand_values() {
    let a = movie(1, 1995, &["Drama", "Crime"]);
    let b = movie(2, 1995, &["Drama", "Crime"]);
    assert!((movie_compatibility(&a, &b).unwrap() - 1.0).abs() < 1e-12);

    let c = movie(3, 1995, &["Comedy", "Romance"]);
    assert!((movie_compatibility(&a, &c).unwrap() - 0.5).abs() < 1e-12);

    // Years 1990 vs 2000, genres {A,B} vs {B,C}: 0.5 e^-1 + 0.5/3.
    let d = movie(4, 1990, &["A", "B"]);
    let e = movie(5, 2000, &["B", "C"]);
    assert!((movie_compatibility(&d, &e).unwrap() - 0.350_606_387_252_387_8).abs() < 1e-9);

    // Symmetry.
    assert_eq!(
        movie_compatibility(&d, &e).unwrap(),
        movie_compatibility(&e, &d).unwrap()
    );
}

#[test]
fn movie_compatibility_requires_year_and_genres() {
    let good = movie(1, 1995, &["Drama"]);
    let no_year = ItemMetadata { year: None, ..movie(2, 0, &["Drama"]) };
    assert!(movie_compatibility(&good, &no_year).is_err());
    let no_genres = ItemMetadata { genres: None, ..movie(3, 1990, &[]) };
    assert!(movie_compatibility(&good, &no_genres).is_err());
    let empty_genres = movie(4, 1990, &[]);
    assert!(movie_compatibility(&good, &empty_genres).is_err());
}

#[test]
fn haversine_matches_an_independent_oracle() {
    assert_eq!(haversine_km((12.0, 34.0), (12.0, 34.0)).unwrap(), 0.0);

    // Antipodal arc along the equator: pi * R.
    let half_circle = haversine_km((0.0, 0.0), (0.0, 180.0)).unwrap();
    assert!((half_circle - 20_015.086_796_020_572).abs() < 0.1);

    // Two downtown coordinates, checked against a spherical-law-of-cosines
    // oracle (frozen at 1.3131710628872535 km); agreement within 1 m.
    let d = haversine_km((39.9526, -75.1652), (39.9496, -75.1503)).unwrap();
    assert!((d - 1.313_171_062_887_253_5).abs() < 1e-3, "{d}");

    assert!(haversine_km((91.0, 0.0), (0.0, 0.0)).is_err());
    assert!(haversine_km((0.0, 181.0), (0.0, 0.0)).is_err());
}

#[test]
fn haversine_triangle_inequality_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..300 {
        let p = (rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
        let q = (rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
        let r = (rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
        let pq = haversine_km(p, q).unwrap();
        let qr = haversine_km(q, r).unwrap();
        let pr = haversine_km(p, r).unwrap();
        assert!(pr <= pq + qr + 1e-9, "triangle violated: {pr} > {pq} + {qr}");
    }
}

fn venue(id: u64, lat: f64, lon: f64) -> ItemMetadata {
    ItemMetadata { id, location: Some((lat, lon)), ..ItemMetadata::default() }
}

#[test]
fn venue_compatibility_decays_with_distance() {
    let a = venue(1, 39.9526, -75.1652);
    assert_eq!(venue_compatibility(&a, &a).unwrap(), 1.0);

    // 3 km apart along a meridian: score e^-1. One degree latitude is
    // 6371 * pi / 180 km, so 3 km is 3 / 111.194... degrees.
    let deg = 3.0 / (6371.0 * std::f64::consts::PI / 180.0);
    let b = venue(2, 39.9526 + deg, -75.1652);
    let s = venue_compatibility(&a, &b).unwrap();
    assert!((s - 0.367_879_441_171_442_33).abs() < 1e-6, "{s}");

    assert_eq!(
        venue_compatibility(&a, &b).unwrap(),
        venue_compatibility(&b, &a).unwrap()
    );
}

fn electronics(id: u64, also_buy: &[u64], also_view: &[u64]) -> ItemMetadata {
    ItemMetadata {
        id,
        also_buy: Some(also_buy.to_vec()),
        also_view: Some(also_view.to_vec()),
        ..ItemMetadata::default()
    }
}

#[test]
fn copurchase_scores_follow_the_edge_weights() {
    let items = vec![
        electronics(1, &[2], &[3]),
        electronics(2, &[1], &[]),
        electronics(3, &[], &[]),
        electronics(4, &[], &[]),
    ];
    let (table, dropped) = copurchase_table(&items);
    assert_eq!(dropped, 0);
    // Mutual also-buy: (1 + 1)/2 = 1, the global max, so 1.0.
    assert_eq!(table.get(0, 1), 1.0);
    // One-directional also-view: (0.5 + 0)/2 = 0.25 after normalization.
    assert_eq!(table.get(0, 2), 0.25);
    // No relationship.
    assert_eq!(table.get(2, 3), 0.0);
    assert_eq!(table.get(0, 3), 0.0);
}

#[test]
fn copurchase_drops_unknown_references() {
    let items = vec![electronics(1, &[99], &[]), electronics(2, &[], &[])];
    let (table, dropped) = copurchase_table(&items);
    assert_eq!(dropped, 1);
    assert_eq!(table.get(0, 1), 0.0);
}

fn popular(id: u64, popularity: u64) -> ItemMetadata {
    ItemMetadata { id, popularity: Some(popularity), ..ItemMetadata::default() }
}

#[test]
fn popularity_groups_follow_the_thresholds() {
    // Two tiers at 20,000 votes.
    let items = vec![popular(1, 25_000), popular(2, 5_000)];
    assert_eq!(assign_groups_by_popularity(&items, &[20_000]).unwrap(), vec![0, 1]);

    // Three tiers at 100 and 500 reviews.
    let items = vec![popular(1, 600), popular(2, 300), popular(3, 50)];
    assert_eq!(assign_groups_by_popularity(&items, &[100, 500]).unwrap(), vec![0, 1, 2]);

    // A count exactly at a cutoff falls to the less popular side.
    let items = vec![popular(1, 500), popular(2, 100)];
    assert_eq!(assign_groups_by_popularity(&items, &[100, 500]).unwrap(), vec![1, 2]);

    let missing = vec![ItemMetadata { id: 9, ..ItemMetadata::default() }];
    assert!(assign_groups_by_popularity(&missing, &[100]).is_err());
    assert!(assign_groups_by_popularity(&items, &[500, 100]).is_err());
}

fn tagged(id: u64, country: &str) -> ItemMetadata {
    ItemMetadata { id, country: Some(country.to_string()), ..ItemMetadata::default() }
}

#[test]
fn tag_groups_follow_the_order() {
    let order: Vec<String> = ["CN", "JP", "KR", "US"].iter().map(|s| s.to_string()).collect();
    let items = vec![tagged(1, "US"), tagged(2, "CN"), tagged(3, "KR")];
    assert_eq!(assign_groups_by_tag(&items, &order).unwrap(), vec![3, 0, 2]);

    // All items under one tag degenerate to a single occupied group.
    let same = vec![tagged(1, "JP"), tagged(2, "JP")];
    assert_eq!(assign_groups_by_tag(&same, &order).unwrap(), vec![1, 1]);

    let unknown = vec![tagged(1, "FR")];
    assert!(assign_groups_by_tag(&unknown, &order).is_err());
    let missing = vec![ItemMetadata { id: 4, ..ItemMetadata::default() }];
    assert!(assign_groups_by_tag(&missing, &order).is_err());
}

#[test]
fn built_catalogs_are_symmetric_unit_tables_and_partitions() {
    // Movie-style build over a small metadata set with years and genres.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let genre_pool = ["Drama", "Comedy", "Action", "Noir"];
    let metadata: Vec<ItemMetadata> = (0..20u64)
        .map(|id| {
            let mut m = movie(
                id,
                1960 + rng.random_range(0..50),
                &genre_pool[..1 + rng.random_range(0..3usize)],
            );
            m.popularity = Some(rng.random_range(0..40_000));
            m
        })
        .collect();
    let (catalog, _, report) = build_catalog(
        &metadata,
        CompatRule::Movie,
        &GroupRule::PopularityThresholds(vec![20_000]),
        &FilterSpec::default(),
    )
    .unwrap();
    assert_eq!(report.kept, 20);

    // Every pairwise value in range, every item in exactly one group.
    for v in catalog.compat_table().cells() {
        assert!((0.0..=1.0).contains(v));
    }
    let group_sizes = (0..catalog.group_count())
        .map(|g| catalog.items().iter().filter(|i| i.group == g).count())
        .sum::<usize>();
    assert_eq!(group_sizes, catalog.len());

    // Items missing fields are dropped with a report, not an error.
    let mut with_holes = metadata.clone();
    with_holes.push(ItemMetadata { id: 99, ..ItemMetadata::default() });
    let (catalog2, _, report2) = build_catalog(
        &with_holes,
        CompatRule::Movie,
        &GroupRule::PopularityThresholds(vec![20_000]),
        &FilterSpec::default(),
    )
    .unwrap();
    assert_eq!(report2.missing_compat_fields, 1);
    assert_eq!(catalog2.len(), 20);
}

#[test]
fn filters_apply_before_the_build() {
    let items = vec![
        ItemMetadata { popularity: Some(10), ..tagged(1, "US") },
        ItemMetadata { popularity: Some(100), ..tagged(2, "US") },
        ItemMetadata { popularity: Some(100), ..tagged(3, "CN") },
    ];
    let filter = FilterSpec {
        min_popularity: Some(20),
        countries: Some(vec!["US".to_string()]),
    };
    let (catalog, _, report) = build_catalog(
        &items,
        CompatRule::Copurchase,
        &GroupRule::TagOrder(vec!["US".to_string()]),
        &filter,
    )
    .unwrap();
    assert_eq!(report.filtered_out, 2);
    assert_eq!(catalog.len(), 1);
}

#[test]
fn catalog_archive_round_trips_losslessly() {
    let catalog = synthetic_catalog(&SyntheticCatalogSpec {
        group_sizes: vec![7, 5],
        type_count: 3,
        types_per_item: 2,
        seed: 99,
    })
    .unwrap();
    let names = vec!["alpha".to_string(), "beta".to_string(), "gamma".to_string()];

    let file = NamedTempFile::new().unwrap();
    save_catalog(file.path(), &catalog, &names).unwrap();
    let (loaded, loaded_names) = load_catalog(file.path()).unwrap();

    assert_eq!(loaded_names, names);
    assert_eq!(loaded.group_count(), catalog.group_count());
    assert_eq!(loaded.type_count(), catalog.type_count());
    assert_eq!(loaded.len(), catalog.len());
    for (a, b) in loaded.items().iter().zip(catalog.items()) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.group, b.group);
        assert_eq!(a.types, b.types);
    }
    // Bit-exact float round-trip.
    assert_eq!(loaded.compat_table().cells(), catalog.compat_table().cells());
}
