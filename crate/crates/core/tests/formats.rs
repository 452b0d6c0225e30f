//! Byte-level checks of the files exchanged with the forecasting model:
//! forecast tables, binary tensors and indexed segmentation PNGs.

use chrono::{TimeZone, Utc};

use skycast::dataset::{TargetMode, Window};
use skycast::latent::{StateMatrix, HEADER_LEN};
use skycast::segmentation::{SegMap, SkyClass};
use skycast::series::IrradianceSeries;
use skycast::table::{probability_bin, ForecastRow, ForecastTable};
use skycast::Error;

const HEADER: &str = "issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2";

fn prob_header() -> String {
    let cols: Vec<String> = (0..100).map(|k| format!("p{k:03}")).collect();
    format!("{HEADER},aux_irradiance_wm2,{}", cols.join(","))
}

fn schema_line(e: Error) -> u64 {
    match e {
        Error::Schema { line, .. } => line,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn forecast_table_roundtrip_base_columns() {
    let t0 = Utc.with_ymd_and_hms(2019, 8, 2, 9, 30, 0).unwrap();
    let table = ForecastTable::new(vec![ForecastRow::new(t0, 2, 512.5, 498.25), ForecastRow::new(t0, 10, 530.0, 480.0)]);
    let csv = table.to_csv();
    assert_eq!(csv.lines().next().unwrap(), HEADER);
    assert_eq!(ForecastTable::parse_csv(&csv, "t").unwrap(), table);
}

#[test]
fn model_export_with_distribution_is_accepted() {
    // what the forecasting model writes: aux column plus a 100-bin distribution
    let mut text = prob_header();
    text.push('\n');
    for (h, y) in [(2u32, 415.0f64), (6, 390.0)] {
        let mut p = vec![0.0; 100];
        p[probability_bin(y)] = 0.75;
        p[probability_bin(y) + 1] = 0.25;
        let probs: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("2019-07-04T11:20:00Z,{h},{y},{},402.0,{}\n", y - 5.0, probs.join(",")));
    }
    let table = ForecastTable::parse_csv(&text, "export.csv").unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].aux_irradiance, Some(402.0));
    let p = table.rows[1].probabilities.as_ref().unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(ForecastTable::parse_csv(&table.to_csv(), "again").unwrap(), table);
}

#[test]
fn bin_index_is_floor_of_y_over_13() {
    assert_eq!(probability_bin(0.0), 0);
    assert_eq!(probability_bin(12.99), 0);
    assert_eq!(probability_bin(13.0), 1);
    assert_eq!(probability_bin(1299.0), 99);
    assert_eq!(probability_bin(5000.0), 99);
    assert_eq!(probability_bin(-4.0), 0);
}

#[test]
fn unnormalized_distribution_reports_its_line() {
    let mut text = prob_header();
    text.push('\n');
    let good: Vec<String> = (0..100).map(|k| if k == 3 { "1".into() } else { "0".into() }).collect();
    let bad: Vec<String> = (0..100).map(|k| if k == 3 { "0.9".into() } else { "0".into() }).collect();
    text.push_str(&format!("2019-07-04T11:20:00Z,2,1,1,1,{}\n", good.join(",")));
    text.push_str(&format!("2019-07-04T11:22:00Z,2,1,1,1,{}\n", bad.join(",")));
    assert_eq!(schema_line(ForecastTable::parse_csv(&text, "p.csv").unwrap_err()), 3);
}

#[test]
fn schema_errors_carry_line_numbers() {
    let bad_header = "issue,horizon,y,yhat\n";
    assert_eq!(schema_line(ForecastTable::parse_csv(bad_header, "a").unwrap_err()), 1);

    let bad_value = format!("{HEADER}\n2019-01-02T10:00:00Z,2,1,1\n2019-01-02T10:02:00Z,2,abc,1\n");
    assert_eq!(schema_line(ForecastTable::parse_csv(&bad_value, "b").unwrap_err()), 3);

    let bad_time = format!("{HEADER}\nyesterday,2,1,1\n");
    assert_eq!(schema_line(ForecastTable::parse_csv(&bad_time, "c").unwrap_err()), 2);

    let dup = format!("{HEADER}\n2019-01-02T10:00:00Z,2,1,1\n2019-01-02T10:00:00Z,2,1,1\n");
    assert_eq!(schema_line(ForecastTable::parse_csv(&dup, "d").unwrap_err()), 3);

    let partial_probs = format!("{HEADER},p000,p001\n");
    assert_eq!(schema_line(ForecastTable::parse_csv(&partial_probs, "e").unwrap_err()), 1);
}

#[test]
fn irradiance_csv_layout() {
    let text = "timestamp_iso,ghi_wm2\n2019-05-01T10:00:00Z,612.5\n2019-05-01T10:01:00Z,615\n";
    let s = IrradianceSeries::parse_csv(text, "ghi.csv").unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.to_csv(), "timestamp_iso,ghi_wm2\n2019-05-01T10:00:00Z,612.5\n2019-05-01T10:01:00Z,615\n");
    assert_eq!(schema_line(IrradianceSeries::parse_csv("time,ghi\n", "x").unwrap_err()), 1);
}

#[test]
fn state_matrix_header_is_little_endian() {
    let m = StateMatrix::new(2, 3, vec![1.0, -2.0, 0.5, 3.25, 0.0, 1e-3]).unwrap();
    let bytes = m.to_bytes();
    assert_eq!(HEADER_LEN, 16);
    assert_eq!(&bytes[0..4], b"HNST");
    assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
    assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
    assert_eq!(bytes.len(), 16 + 6 * 4);
    assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
    assert_eq!(&bytes[20..24], &(-2.0f32).to_le_bytes());
    let back = StateMatrix::from_bytes(&bytes).unwrap();
    assert_eq!(back.rows, 2);
    assert_eq!(back.data[5], 1e-3f32 as f64);
}

#[test]
fn truncated_or_foreign_binaries_are_rejected() {
    let m = StateMatrix::new(1, 2, vec![1.0, 2.0]).unwrap();
    let bytes = m.to_bytes();
    assert!(StateMatrix::from_bytes(&bytes[..20]).is_err());
    assert!(StateMatrix::from_bytes(&bytes[..10]).is_err());
    let mut foreign = bytes.clone();
    foreign[0] = b'X';
    assert!(StateMatrix::from_bytes(&foreign).is_err());
}

fn tiny_window() -> Window {
    let t = Utc.with_ymd_and_hms(2019, 6, 3, 12, 0, 0).unwrap();
    let size = 2u32;
    let channels = 4;
    let frames = 3;
    let input: Vec<f32> = (0..frames * channels * 4).map(|k| k as f32 / 100.0).collect();
    Window {
        issue_time: t,
        ghi_t: 650.0,
        input,
        channels,
        size,
        target_times: vec![t + chrono::Duration::minutes(2)],
        targets: vec![-12.5],
        target_mode: TargetMode::Change,
        segmaps: vec![SegMap::filled(size, size, SkyClass::Cloud)],
    }
}

#[test]
fn window_tensor_layout() {
    let w = tiny_window();
    let bytes = w.input_bytes();
    assert_eq!(&bytes[0..4], b"HNST");
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    assert_eq!((word(1), word(2), word(3)), (3, 16, 4));
    assert_eq!(bytes.len(), 16 + 48 * 4);
    // frame-major, then channel, then row-major pixels
    let at = |k: usize| f32::from_le_bytes(bytes[16 + 4 * k..20 + 4 * k].try_into().unwrap());
    assert_eq!(at(0), 0.0);
    assert_eq!(at(47), 0.47);
    let m = StateMatrix::from_bytes(&bytes).unwrap();
    assert_eq!((m.rows, m.cols, m.channels), (3, 16, 4));
}

#[test]
fn window_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let w = tiny_window();
    let written = w.write(dir.path()).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["20190603120000_input.bin", "20190603120000_targets.csv", "20190603120000_seg1.png"]);
    let csv = std::fs::read_to_string(&written[1]).unwrap();
    assert_eq!(
        csv,
        "horizon_index,target_time_iso,target_mode,value,ghi_t\n1,2019-06-03T12:02:00Z,change,-12.5,650\n"
    );
    assert_eq!(SegMap::read_png(&written[2]).unwrap(), w.segmaps[0]);
}

#[test]
fn segmentation_png_is_indexed_with_the_exchange_palette() {
    let labels: Vec<u8> = vec![0, 1, 2, 3, 4, 0];
    let map = SegMap::from_labels(3, 2, labels.clone()).unwrap();
    let bytes = map.encode_png().unwrap();

    let mut dec = png::Decoder::new(std::io::Cursor::new(&bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().unwrap();
    let info = reader.info();
    assert_eq!(info.color_type, png::ColorType::Indexed);
    assert_eq!(info.bit_depth, png::BitDepth::Eight);
    let palette = info.palette.as_ref().unwrap().to_vec();
    let expected: [[u8; 3]; 5] = [[135, 206, 235], [128, 128, 128], [255, 215, 0], [255, 255, 255], [0, 0, 0]];
    for (id, rgb) in expected.iter().enumerate() {
        assert_eq!(&palette[3 * id..3 * id + 3], rgb, "class {id}");
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap()];
    reader.next_frame(&mut buf).unwrap();
    assert_eq!(&buf[..6], &labels[..]);

    // a generic decoder sees the palette colors
    let rgb = image::load_from_memory(&bytes).unwrap().to_rgb8();
    assert_eq!(rgb.get_pixel(2, 0).0, [255, 215, 0]);
    assert_eq!(rgb.get_pixel(1, 1).0, [0, 0, 0]);
}

#[test]
fn png_with_a_foreign_palette_is_rejected() {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(vec![1u8; 15]);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0]).unwrap();
    }
    assert!(SegMap::decode_png(&out).is_err());
}
