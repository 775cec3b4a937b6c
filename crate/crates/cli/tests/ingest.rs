use std::io::Write;
use std::path::{Path, PathBuf};

use extentlab::domain::{SeasonConfig, Site, StationSeries, ALL_REGION};
use extentlab::domain::{GridPoint, GridSpec};
use extentlab_cli::ingest::{export_grid, export_stations, ingest_grid, ingest_stations};
use extentlab_cli::CliError;
use proptest::prelude::*;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const HEADER: &str = "station_id,lon,lat,elev_m,date,tmax_c\n";
const GRID_HEADER: &str = "grid_id,lon,lat,elev_m,cell_area_km2,regions\n";

fn row_line(e: CliError) -> (u64, String) {
    match e {
        CliError::Row { line, message, .. } => (line, message),
        other => panic!("expected a row error, got {other}"),
    }
}

#[test]
fn eighteen_stations_over_sixty_years() {
    let dir = tempfile::tempdir().unwrap();
    let season = SeasonConfig::default();
    let mut text = String::from(HEADER);
    for s in 0..18 {
        for y in 1..=60u32 {
            for d in 1..=153u32 {
                let date = season.date_of(y, d).unwrap();
                let v = 20.0 + (s as f64) * 0.1 + (d as f64 / 153.0) * 10.0;
                text.push_str(&format!("A{s:02},{},{},{},{date},{v:.1}\n", -1.0 + s as f64 * 0.05, 41.0, 300 + s));
            }
        }
    }
    let path = write(dir.path(), "st.csv", &text);
    let (stations, report) = ingest_stations(&path, &season).unwrap();
    assert_eq!(stations.len(), 18);
    assert!(stations.iter().all(|s| s.n_years() == 60 && s.season_length() == 153));
    assert_eq!(season.calendar_year(60), 2015);
    assert!(report.missing.iter().all(|(_, n)| *n == 0));
    assert_eq!(report.skipped_rows, 0);
}

#[test]
fn out_of_bounds_temperature_is_rejected_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}a,0,41,10,1956-05-01,25\na,0,41,10,1956-05-02,80\n");
    let path = write(dir.path(), "st.csv", &text);
    let e = ingest_stations(&path, &SeasonConfig::default()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let (line, msg) = row_line(e);
    assert_eq!(line, 3);
    assert!(msg.contains("80"), "{msg}");
}

#[test]
fn duplicate_date_names_station_and_date() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}a,0,41,10,1956-05-01,25\nb,1,41,10,1956-05-01,25\na,0,41,10,1956-05-01,26\n");
    let path = write(dir.path(), "st.csv", &text);
    let (line, msg) = row_line(ingest_stations(&path, &SeasonConfig::default()).unwrap_err());
    assert_eq!(line, 4);
    assert!(msg.contains("station a") && msg.contains("1956-05-01"), "{msg}");
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let season = SeasonConfig::default();
    let cases = [
        (format!("{HEADER}a,0,41,10,1956-05-01,25\na,zero,41,10,1956-05-02,25\n"), 3),
        (format!("{HEADER}a,0,41,10,1956-05-01,25\na,0,41,10,05/02/1956,25\n"), 3),
        (format!("{HEADER}a,0,41,10,1956-05-01\n"), 2),
        (format!("{HEADER}a,0,41,10,1956-05-01,25\na,0.5,41,10,1956-05-02,25\n"), 3),
        ("station,lon,lat,elev_m,date,tmax_c\n".to_string(), 1),
    ];
    for (text, want) in cases {
        let path = write(dir.path(), "st.csv", &text);
        let (line, msg) = row_line(ingest_stations(&path, &season).unwrap_err());
        assert_eq!(line, want, "{msg}");
    }
}

#[test]
fn empty_values_are_missing_and_outside_rows_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let season = SeasonConfig { length: 3, ..SeasonConfig::default() };
    let text = format!(
        "{HEADER}a,0,41,10,1956-05-01,25\na,0,41,10,1956-05-02,\na,0,41,10,1956-04-30,20\n\
         a,0,41,10,1957-05-03,21\nb,1,41,5,1957-05-01,22\nb,1,41,5,1955-05-01,22\n"
    );
    let path = write(dir.path(), "st.csv", &text);
    let (st, report) = ingest_stations(&path, &season).unwrap();
    assert_eq!(report.skipped_rows, 2);
    assert_eq!(report.n_years, 2);
    assert_eq!(report.missing, vec![("a".to_string(), 4), ("b".to_string(), 5)]);
    assert_eq!(st[0].get(1, 1), Some(25.0));
    assert_eq!(st[0].get(1, 2), None);
    assert_eq!(st[0].get(2, 3), Some(21.0));
    assert_eq!(st[1].get(2, 1), Some(22.0));
}

#[test]
fn mixed_cell_areas_give_proportional_weights() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GRID_HEADER}g1,0,41,100,16,plain\ng2,0.1,41,100,16,plain\ng3,0.2,41,900,1,plain;pyrenees\ng4,0.3,41,950,1,pyrenees\n");
    let grid = ingest_grid(&write(dir.path(), "g.csv", &text)).unwrap();
    let w = grid.region_weights(ALL_REGION).unwrap();
    let want = [16.0 / 34.0, 16.0 / 34.0, 1.0 / 34.0, 1.0 / 34.0];
    for (a, b) in w.iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(grid.region_weights("pyrenees").unwrap(), vec![0.0, 0.0, 0.5, 0.5]);
    assert_eq!(grid.region_names(), vec!["ALL", "plain", "pyrenees"]);
}

#[test]
fn unlabelled_grid_has_only_all() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GRID_HEADER}g1,0,41,100,16,\ng2,0.1,41,100,16, \n");
    let grid = ingest_grid(&write(dir.path(), "g.csv", &text)).unwrap();
    assert_eq!(grid.region_names(), vec![ALL_REGION.to_string()]);
}

#[test]
fn bad_grid_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let neg = format!("{GRID_HEADER}g1,0,41,100,16,\ng2,0.1,41,100,-4,\n");
    let (line, msg) = row_line(ingest_grid(&write(dir.path(), "g.csv", &neg)).unwrap_err());
    assert_eq!(line, 3);
    assert!(msg.contains("nonpositive"), "{msg}");
    let dup = format!("{GRID_HEADER}g1,0,41,100,16,\ng1,0.1,41,100,16,\n");
    let (line, msg) = row_line(ingest_grid(&write(dir.path(), "g.csv", &dup)).unwrap_err());
    assert_eq!(line, 3);
    assert!(msg.contains("duplicate grid_id g1"), "{msg}");
}

#[test]
fn missing_file_is_an_io_error() {
    let e = ingest_grid(Path::new("/nonexistent/grid.csv")).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}

fn temps() -> impl Strategy<Value = Option<f64>> {
    prop::option::weighted(0.8, -30.0f64..=55.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn station_export_reingests_identically(
        n_years in 1usize..4,
        len in 1u32..6,
        n_sites in 1usize..4,
        vals in prop::collection::vec(temps(), 72),
        coords in prop::collection::vec((-10.0f64..10.0, 35.0f64..45.0, -50.0f64..3000.0), 3),
    ) {
        let season = SeasonConfig { length: len, start_month: 6, start_day: 30, first_year: 1990 };
        let per = n_years * len as usize;
        let stations: Vec<StationSeries> = (0..n_sites)
            .map(|i| {
                let (lon, lat, elev) = coords[i];
                let site = Site::new(format!("s{i}"), lon, lat, elev).unwrap();
                StationSeries::from_values(site, n_years, len as usize, vals[i * per..(i + 1) * per].to_vec()).unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.csv");
        export_stations(std::fs::File::create(&path).unwrap(), &stations, &season).unwrap();
        let (back, _) = ingest_stations(&path, &season).unwrap();
        prop_assert_eq!(back, stations);
    }

    #[test]
    fn grid_export_reingests_identically(
        pts in prop::collection::vec((-10.0f64..10.0, 35.0f64..45.0, 0.0f64..3000.0, 0.01f64..100.0, 0usize..4), 1..20),
    ) {
        let labels = [vec![], vec!["a".to_string()], vec!["b".to_string()], vec!["a".to_string(), "b".to_string()]];
        let grid = GridSpec::new(
            pts.iter()
                .enumerate()
                .map(|(i, &(lon, lat, elev, area, l))| GridPoint {
                    site: Site::new(format!("g{i}"), lon, lat, elev).unwrap(),
                    cell_area: area,
                    regions: labels[l].clone(),
                })
                .collect(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        export_grid(&mut f, &grid).unwrap();
        f.flush().unwrap();
        prop_assert_eq!(ingest_grid(&path).unwrap(), grid);
    }
}
