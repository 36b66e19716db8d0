use std::ffi::OsStr;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fheede::{format, pgm};
use fheede_core::de::{build_map, EmbedConfig, Image};

fn fheede<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_fheede"))
        .args(args)
        .env_remove(fheede::config::PROFILE_ENV)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .to_string()
}

fn image() -> Image {
    let data = (0..16 * 12)
        .map(|i| (80 + (i / 16) * 4 + (i % 16) * 2 + (i * 7) % 3) as u8)
        .collect();
    Image::new(16, 12, data).unwrap()
}

/// Keys, image and map in `t`.
fn setup(t: &Path) {
    ok(&fheede(["keygen", "--seed", "1", "--out", &p(t, "keys")]));
    let img = image();
    pgm::write_pgm(&img, t.join("img.pgm")).unwrap();
    let map = build_map(&img, EmbedConfig::new(10).unwrap(), None).unwrap();
    fs::write(t.join("map.bin"), format::encode_map(&map)).unwrap();
    fs::write(t.join("payload.raw"), b"\xa5\x3c").unwrap();
}

fn p(t: &Path, name: &str) -> String {
    t.join(name).to_string_lossy().into_owned()
}

#[test]
fn universal_pipeline_with_refresh_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    setup(t);
    let keys = p(t, "keys");
    let server = p(t, "keys/server");
    let oracle = p(t, "keys/oracle/refresh.oracle");
    ok(&fheede([
        "encrypt",
        &p(t, "img.pgm"),
        "--mode",
        "universal",
        "--keys",
        &keys,
        "--map",
        &p(t, "map.bin"),
        "--out",
        &p(t, "store.bin"),
    ]));

    // Universal hiding needs refresh between circuits.
    let o = fheede([
        "embed",
        &p(t, "store.bin"),
        "--payload",
        &p(t, "payload.raw"),
        "--dh-key",
        &p(t, "dh.key"),
        "--switch-keys",
        &server,
        "--out",
        &p(t, "marked.bin"),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let out = ok(&fheede([
        "embed",
        &p(t, "store.bin"),
        "--payload",
        &p(t, "payload.raw"),
        "--dh-key",
        &p(t, "dh.key"),
        "--switch-keys",
        &server,
        "--refresh-oracle",
        &oracle,
        "--out",
        &p(t, "marked.bin"),
        "--jobs",
        "3",
    ]));
    assert_eq!(field(&out, "embedded"), "16");
    assert_eq!(field(&out, "mults"), (16 * 6 * 84).to_string());

    ok(&fheede([
        "decrypt",
        &p(t, "marked.bin"),
        "--keys",
        &keys,
        "--out",
        &p(t, "marked.pgm"),
    ]));
    ok(&fheede([
        "de-extract",
        &p(t, "marked.pgm"),
        "--map",
        &p(t, "map.bin"),
        "--count",
        "16",
        "--out",
        &p(t, "de_bits.bin"),
    ]));
    ok(&fheede([
        "extract-ct",
        &p(t, "marked.bin"),
        "--dh-key",
        &p(t, "dh.key"),
        "--out",
        &p(t, "ct_bits.bin"),
    ]));
    ok(&fheede([
        "extract-enc",
        &p(t, "marked.bin"),
        "--switch-keys",
        &server,
        "--refresh-oracle",
        &oracle,
        "--out",
        &p(t, "enc.bin"),
    ]));
    ok(&fheede([
        "decrypt",
        &p(t, "enc.bin"),
        "--keys",
        &keys,
        "--out",
        &p(t, "enc_bits.bin"),
    ]));
    let expected: Vec<u8> = [0xa5u8, 0x3c]
        .iter()
        .flat_map(|b| (0..8).map(move |i| (b >> i) & 1))
        .collect();
    for f in ["de_bits.bin", "ct_bits.bin", "enc_bits.bin"] {
        assert_eq!(
            format::decode_bits(&fs::read(t.join(f)).unwrap()).unwrap(),
            expected,
            "{f}"
        );
    }

    ok(&fheede([
        "recover-ct",
        &p(t, "marked.bin"),
        "--switch-keys",
        &server,
        "--refresh-oracle",
        &oracle,
        "--out",
        &p(t, "back.bin"),
    ]));
    ok(&fheede([
        "decrypt",
        &p(t, "back.bin"),
        "--keys",
        &keys,
        "--out",
        &p(t, "back.pgm"),
    ]));
    assert_eq!(pgm::read_pgm(t.join("back.pgm")).unwrap(), image());
    ok(&fheede([
        "de-recover",
        &p(t, "marked.pgm"),
        "--map",
        &p(t, "map.bin"),
        "--count",
        "16",
        "--out",
        &p(t, "back2.pgm"),
    ]));
    assert_eq!(pgm::read_pgm(t.join("back2.pgm")).unwrap(), image());
}

#[test]
fn jobs_do_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    setup(t);
    let server = p(t, "keys/server");
    ok(&fheede([
        "encrypt",
        &p(t, "img.pgm"),
        "--mode",
        "efficient",
        "--keys",
        &p(t, "keys"),
        "--map",
        &p(t, "map.bin"),
        "--out",
        &p(t, "store.bin"),
    ]));
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let marked = p(t, &format!("marked{jobs}.bin"));
        let stdout = ok(&fheede([
            "embed",
            &p(t, "store.bin"),
            "--payload",
            &p(t, "payload.raw"),
            "--dh-key",
            &p(t, "dh.key"),
            "--switch-keys",
            &server,
            "--out",
            &marked,
            "--seed",
            "9",
            "--jobs",
            jobs,
        ]));
        outputs.push((fs::read(&marked).unwrap(), stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    setup(t);
    let code = |o: Output| o.status.code();
    assert_eq!(
        code(fheede(["de-analyze", &p(t, "img.pgm"), "--hfid", "300"])),
        Some(2)
    );
    assert_eq!(
        code(fheede([
            "keygen",
            "--profile",
            "nope",
            "--out",
            &p(t, "k2")
        ])),
        Some(2)
    );
    assert_eq!(code(fheede(["frobnicate"])), Some(2));
    assert_eq!(
        code(fheede([
            "decrypt",
            &p(t, "img.pgm"),
            "--keys",
            &p(t, "keys"),
            "--out",
            &p(t, "x")
        ])),
        Some(4)
    );
    fs::write(t.join("bad.pgm"), b"P2\n1 1\n255\n0").unwrap();
    assert_eq!(
        code(fheede(["de-analyze", &p(t, "bad.pgm"), "--hfid", "1"])),
        Some(4)
    );
    // The whole keygen directory holds the secret key.
    assert_eq!(
        code(fheede([
            "extract-enc",
            &p(t, "img.pgm"),
            "--switch-keys",
            &p(t, "keys"),
            "--out",
            &p(t, "x")
        ])),
        Some(3)
    );
    assert_eq!(
        code(fheede(["de-analyze", &p(t, "missing.pgm"), "--hfid", "1"])),
        Some(1)
    );
}

#[test]
fn de_analyze_reports_capacity() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    pgm::write_pgm(&image(), t.join("img.pgm")).unwrap();
    let out = ok(&fheede([
        "de-analyze",
        &p(t, "img.pgm"),
        "--hfid",
        "10",
        "--map-out",
        &p(t, "m.bin"),
        "--target-ec",
        "5",
    ]));
    assert_eq!(field(&out, "ec"), "5");
    assert_eq!(field(&out, "psnr2"), "inf");
    let map = format::decode_map(&fs::read(t.join("m.bin")).unwrap()).unwrap();
    assert_eq!(map.count(), 5);
}

#[test]
fn profile_env_override() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = fheede::config::to_config(&fheede_core::params::ParamProfile {
        n: 8,
        q: 127,
        d: 100,
        beta: 7,
        ..fheede_core::params::ParamProfile::toy()
    });
    fs::write(t.join("tiny.cfg"), cfg).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fheede"))
        .args(["keygen", "--out", &p(t, "k")])
        .env(fheede::config::PROFILE_ENV, t.join("tiny.cfg"))
        .output()
        .unwrap();
    assert!(ok(&o).contains("n=8 q=127"));
    let (prof, _) =
        format::decode_public_key(&fs::read(t.join("k/server/public.key")).unwrap(), None).unwrap();
    assert_eq!(prof.n, 8);
}

#[test]
fn report_matches_table() {
    let out = ok(&fheede(["report"]));
    assert_eq!(
        out.lines().filter(|l| l.ends_with(" ok")).count(),
        7,
        "{out}"
    );
}

#[test]
fn bench_prints_every_operation() {
    let out = ok(&fheede(["bench", "--iters", "2"]));
    for op in [
        "keygen",
        "encrypt_bit",
        "hmul_with_keyswitch",
        "keyswitch_lsb",
        "refresh",
        "add8",
    ] {
        assert!(out.contains(op), "{op} missing");
    }
}
