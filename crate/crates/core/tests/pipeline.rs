use pfscale::bench::{read_samples_csv, run_campaign, BenchSample, CampaignSpec, SampleWriter, SizeGrid, Subject};
use pfscale::network::{generate_radial, load_network, save_network, GeneratorSpec, Network};
use pfscale::regression::{median_per_case, points_for, summarize, write_table_csv};
use pfscale::svg::{scatter_fit_svg, spy_svg, Series};
use pfscale::ybus::assemble;

fn small_campaign(seed: u64) -> CampaignSpec {
    CampaignSpec {
        subjects: vec![Subject::YbusSolve, Subject::FixedPointPF, Subject::ConstAdmittancePF],
        sizes: Some(SizeGrid {
            min: 200,
            max: 3000,
            count: 5,
        }),
        repetitions: 3,
        warmup: 1,
        seed,
        ..Default::default()
    }
}

fn collect(spec: &CampaignSpec) -> (Vec<BenchSample>, Vec<u8>) {
    let mut rows = Vec::new();
    let mut buf = Vec::new();
    {
        let mut w = SampleWriter::new(&mut buf).unwrap();
        let count = run_campaign(spec, |s| {
            rows.push(s.clone());
            w.write(s)
        })
        .unwrap();
        assert_eq!(count, rows.len());
    }
    (rows, buf)
}

/// Everything in a sample except the measured time.
fn structure(rows: &[BenchSample]) -> Vec<(String, Subject, usize, usize, usize, Option<usize>, bool)> {
    rows.iter()
        .map(|s| (s.case_id.clone(), s.subject, s.n, s.nnz, s.run_index, s.iterations, s.failed))
        .collect()
}

#[test]
fn campaign_to_fit_to_figure() {
    let spec = small_campaign(5);
    let (rows, csv) = collect(&spec);
    assert_eq!(rows.len(), 5 * 3 * 3);
    assert!(rows.iter().all(|s| !s.failed && s.t_seconds.is_some_and(|t| t > 0.0)));
    assert!(rows.windows(2).all(|w| w[0].n <= w[1].n));

    let back = read_samples_csv(csv.as_slice()).unwrap();
    assert_eq!(structure(&back), structure(&rows));
    for (a, b) in back.iter().zip(&rows) {
        assert_eq!(a.t_seconds, b.t_seconds);
    }

    let medians = median_per_case(&back);
    assert_eq!(medians.len(), 15);
    let fp: Vec<_> = medians.iter().filter(|m| m.subject == Subject::FixedPointPF).collect();
    assert!(fp.iter().all(|m| m.iterations.is_some_and(|k| (1.0..=25.0).contains(&k))));

    let summary: Vec<_> = summarize(&medians).into_iter().map(Result::unwrap).collect();
    assert_eq!(summary.len(), 3);
    for r in &summary {
        assert!(r.report.alpha.is_finite() && r.report.sigma >= 0.0);
        assert_eq!(r.report.sample_count, 5);
    }
    let mut table = Vec::new();
    write_table_csv(&mut table, &summary).unwrap();
    let table = String::from_utf8(table).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("subject,alpha,"));

    let series: Vec<Series> = [Subject::YbusSolve, Subject::FixedPointPF]
        .into_iter()
        .map(|s| {
            let points = points_for(&medians, s);
            Series {
                label: s.name().into(),
                fit: pfscale::regression::fit_loglog(&points).ok(),
                points,
            }
        })
        .collect();
    let svg = scatter_fit_svg(&series, "t", "n", "s").unwrap();
    assert_eq!(svg.matches("class=\"pt\"").count(), 10);
    assert_eq!(svg.matches("class=\"fit\"").count(), 2);
}

#[test]
fn campaign_structure_is_deterministic() {
    let (a, _) = collect(&small_campaign(11));
    let (b, _) = collect(&small_campaign(11));
    assert_eq!(structure(&a), structure(&b));
    let (c, _) = collect(&small_campaign(12));
    assert_ne!(structure(&a), structure(&c));
}

#[test]
fn network_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = GeneratorSpec::new(2, 99);
    g.buses = g.buses_for_nodes(1500);
    let net = generate_radial(&g).unwrap();
    let path = dir.path().join("net.json");
    save_network(&net, &path).unwrap();
    let back: Network = load_network(&path).unwrap();
    assert_eq!(back.to_json_string().unwrap(), net.to_json_string().unwrap());

    let a = assemble(&net).unwrap();
    let b = assemble(&back).unwrap();
    assert_eq!(a.y_full(), b.y_full());
    assert_eq!(spy_svg(a.y_full(), "x"), spy_svg(b.y_full(), "x"));

    // a campaign reading the file sees the same case as one built in memory
    let spec = CampaignSpec {
        subjects: vec![Subject::YbusSolve],
        networks: vec![path],
        repetitions: 2,
        warmup: 0,
        ..Default::default()
    };
    let (rows, _) = collect(&spec);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].n, net.node_count());
}

#[test]
fn invalid_campaigns_are_rejected() {
    let mut spec = small_campaign(1);
    spec.repetitions = 0;
    assert!(run_campaign(&spec, |_| Ok(())).is_err());
    let spec = CampaignSpec {
        subjects: vec![Subject::UpsilonSolve],
        ..Default::default()
    };
    assert!(run_campaign(&spec, |_| Ok(())).is_err());
    assert!(CampaignSpec::from_json_str(r#"{"subjects": ["YbusSolve"], "bogus": 1}"#).is_err());
}
