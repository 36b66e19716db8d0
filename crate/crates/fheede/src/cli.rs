//! The `fheede` command line.
//!
//! Client commands read `DIR/client/secret.key` or `DIR/server/public.key`
//! from a `keygen` output directory. Server commands read only a directory
//! of public material (`public.key`, `tensor.swk`, `lsb.swk`) and refuse to
//! run if anything under it, or the data-hiding key, is a secret key.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation error, 3 role
//! violation, 4 format error.

use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fheede_core::circuits::{add8, sub8, EncryptedByte};
use fheede_core::de::{self, build_map, EmbedConfig, Image};
use fheede_core::homomorphic::{
    EvalContext, HeError, KeySet, NoopRefresher, OpCounters, Refresher, ServerKeys,
    TrustedRefresher,
};
use fheede_core::lwe;
use fheede_core::params::ParamProfile;
use fheede_core::pipeline::{
    self, Block, CiphertextStore, DataHidingKey, EmbedMode, EncryptedHL, EncryptedPixelPair,
    KsLsbStats, PipelineError, KSLSB_CAP,
};

use crate::config::{self, ConfigError};
use crate::format::{self, FormatError};
use crate::pgm::{self, PgmError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("role violation: {0}")]
    Role(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Role(_) => 3,
            CliError::Format(_) => 4,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(e) => CliError::Runtime(e.to_string()),
            e => CliError::Format(e.to_string()),
        }
    }
}

impl From<PgmError> for CliError {
    fn from(e: PgmError) -> Self {
        match e {
            PgmError::Io(e) => CliError::Runtime(e.to_string()),
            e => CliError::Format(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::He(e) => CliError::Runtime(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<de::DeError> for CliError {
    fn from(e: de::DeError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<HeError> for CliError {
    fn from(e: HeError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "fheede",
    version,
    about = "Reversible data hiding in LWE-encrypted images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Universal,
    Efficient,
}

impl From<Mode> for EmbedMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Universal => EmbedMode::Universal,
            Mode::Efficient => EmbedMode::Efficient,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PayloadKind {
    Zero,
    Random,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate secret, public and switching keys.
    Keygen {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plaintext difference expansion: availability map, EC and PSNR.
    DeAnalyze {
        image: PathBuf,
        #[arg(long)]
        hfid: u32,
        #[arg(long)]
        target_ec: Option<usize>,
        #[arg(long, value_enum, default_value_t = PayloadKind::Random)]
        payload: PayloadKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the availability map here.
        #[arg(long)]
        map_out: Option<PathBuf>,
        /// Write the marked plaintext image here.
        #[arg(long)]
        marked_out: Option<PathBuf>,
    },
    /// Client: encrypt an image for upload.
    Encrypt {
        image: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Server: hide a payload in an encrypted store.
    Embed {
        store: PathBuf,
        #[arg(long)]
        payload: PathBuf,
        /// Data-hiding key; created from `--seed` if the file does not exist.
        #[arg(long)]
        dh_key: PathBuf,
        #[arg(long)]
        switch_keys: PathBuf,
        /// Simulated bootstrapping for universal mode (see `keygen`).
        #[arg(long)]
        refresh_oracle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = KSLSB_CAP)]
        cap: u32,
    },
    /// Server: read the KS-LSB payload from a marked store.
    ExtractCt {
        store: PathBuf,
        #[arg(long)]
        dh_key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Server: undo the hiding, keeping the image encrypted.
    RecoverCt {
        store: PathBuf,
        #[arg(long)]
        switch_keys: PathBuf,
        /// Simulated bootstrapping for universal mode (see `keygen`).
        #[arg(long)]
        refresh_oracle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Server: encryptions of the hidden bits.
    ExtractEnc {
        store: PathBuf,
        #[arg(long)]
        switch_keys: PathBuf,
        /// Simulated bootstrapping for universal mode (see `keygen`).
        #[arg(long)]
        refresh_oracle: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Client: decrypt a store to a PGM, or a bit list to a payload file.
    Decrypt {
        input: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the store's availability map.
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// Client: read the hidden bits from a decrypted marked image.
    DeExtract {
        image: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Client: restore the original image from a decrypted marked image.
    DeRecover {
        image: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wall-clock time per operation.
    Bench {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        iters: usize,
    },
    /// Operation counts of every circuit against the expected table.
    Report {
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Keygen { profile, seed, out } => keygen(profile.as_deref(), seed, &out),
        Command::DeAnalyze {
            image,
            hfid,
            target_ec,
            payload,
            seed,
            map_out,
            marked_out,
        } => de_analyze(
            &image,
            hfid,
            target_ec,
            payload,
            seed,
            map_out.as_deref(),
            marked_out.as_deref(),
        ),
        Command::Encrypt {
            image,
            mode,
            keys,
            map,
            out,
            seed,
        } => encrypt(&image, mode.into(), &keys, &map, &out, seed),
        Command::Embed {
            store,
            payload,
            dh_key,
            switch_keys,
            refresh_oracle,
            out,
            seed,
            jobs,
            cap,
        } => embed(
            &store,
            &payload,
            &dh_key,
            &switch_keys,
            refresh_oracle.as_deref(),
            &out,
            seed,
            jobs,
            cap,
        ),
        Command::ExtractCt { store, dh_key, out } => extract_ct(&store, &dh_key, &out),
        Command::RecoverCt {
            store,
            switch_keys,
            refresh_oracle,
            out,
            seed,
            jobs,
        } => recover_ct(
            &store,
            &switch_keys,
            refresh_oracle.as_deref(),
            &out,
            seed,
            jobs,
        ),
        Command::ExtractEnc {
            store,
            switch_keys,
            refresh_oracle,
            out,
            seed,
            jobs,
        } => extract_enc(
            &store,
            &switch_keys,
            refresh_oracle.as_deref(),
            &out,
            seed,
            jobs,
        ),
        Command::Decrypt {
            input,
            keys,
            out,
            map_out,
        } => decrypt(&input, &keys, &out, map_out.as_deref()),
        Command::DeExtract {
            image,
            map,
            count,
            out,
        } => de_extract(&image, &map, count, &out),
        Command::DeRecover {
            image,
            map,
            count,
            out,
        } => de_recover(&image, &map, count, &out),
        Command::Bench {
            profile,
            seed,
            iters,
        } => bench(profile.as_deref(), seed, iters),
        Command::Report { profile, seed } => report(profile.as_deref(), seed),
    }
}

pub const SECRET_KEY_FILE: &str = "client/secret.key";
pub const PUBLIC_KEY_FILE: &str = "public.key";
pub const TENSOR_KEY_FILE: &str = "tensor.swk";
pub const LSB_KEY_FILE: &str = "lsb.swk";
pub const ORACLE_FILE: &str = "oracle/refresh.oracle";

fn keygen(profile: Option<&str>, seed: u64, out: &Path) -> Result<(), CliError> {
    let p = config::profile_from_flag_or_env(profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks = KeySet::generate(&p, &mut rng);
    let server = out.join("server");
    format::write_file(
        out.join(SECRET_KEY_FILE),
        &format::encode_secret_key(&p, &ks.secret),
    )?;
    format::write_file(
        server.join(PUBLIC_KEY_FILE),
        &format::encode_public_key(&p, &ks.server.public),
    )?;
    if let Some(t) = &ks.server.tensor {
        format::write_file(
            server.join(TENSOR_KEY_FILE),
            &format::encode_switching_key(&p, t),
        )?;
    }
    if let Some(l) = &ks.server.lsb {
        format::write_file(
            server.join(LSB_KEY_FILE),
            &format::encode_switching_key(&p, l),
        )?;
    }
    format::write_file(
        out.join(ORACLE_FILE),
        &format::encode_refresh_oracle(&p, &ks.secret),
    )?;
    let noisy = ks.nonzero_errors();
    println!("profile n={} q={} d={} beta={}", p.n, p.q, p.d, p.beta);
    println!("nonzero_key_errors={noisy}");
    if noisy > 0 {
        eprintln!(
            "warning: {noisy} key rows carry nonzero error; server commands run without a \
             noise refresher and may produce ciphertexts that no longer decrypt correctly"
        );
    }
    Ok(())
}

/// Return the path to a key under a `keygen` directory or a flat one.
fn key_path(dir: &Path, nested: &str, flat: &str) -> PathBuf {
    let n = dir.join(nested);
    if n.exists() {
        n
    } else {
        dir.join(flat)
    }
}

fn starts_with_secret_magic(path: &Path) -> Result<bool, CliError> {
    let mut head = [0u8; 8];
    let mut f = fs::File::open(path)?;
    let n = f.read(&mut head)?;
    Ok(format::is_secret_key(&head[..n]))
}

/// Refuse any secret key under `dir`.
fn refuse_secret_in_dir(dir: &Path) -> Result<(), CliError> {
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if starts_with_secret_magic(&path)? {
                return Err(CliError::Role(format!(
                    "{} is a secret key; server commands accept public material only",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

fn refuse_secret_file(path: &Path) -> Result<(), CliError> {
    if path.exists() && starts_with_secret_magic(path)? {
        return Err(CliError::Role(format!(
            "{} is a secret key; server commands accept public material only",
            path.display()
        )));
    }
    Ok(())
}

fn load_server_keys(
    dir: &Path,
    expected: &ParamProfile,
    need_lsb: bool,
) -> Result<ServerKeys, CliError> {
    refuse_secret_in_dir(dir)?;
    let (p, public) = format::decode_public_key(
        &format::read_file(dir.join(PUBLIC_KEY_FILE))?,
        Some(expected),
    )?;
    let (_, tensor) = format::decode_switching_key(
        &format::read_file(dir.join(TENSOR_KEY_FILE))?,
        Some(expected),
    )?;
    let lsb = if need_lsb {
        let (_, l) = format::decode_switching_key(
            &format::read_file(dir.join(LSB_KEY_FILE))?,
            Some(expected),
        )?;
        Some(l)
    } else {
        None
    };
    Ok(ServerKeys {
        profile: p,
        public,
        tensor: Some(tensor),
        lsb,
    })
}

/// Universal mode chains eleven circuits per pair and needs bootstrapping
/// between them. Efficient mode runs without one.
fn server_refresher(
    oracle: Option<&Path>,
    store: &CiphertextStore,
) -> Result<Box<dyn Refresher>, CliError> {
    match oracle {
        Some(path) => {
            let (_, sk) =
                format::decode_refresh_oracle(&format::read_file(path)?, Some(&store.profile))?;
            Ok(Box::new(TrustedRefresher::new(sk)))
        }
        None if store.mode == EmbedMode::Universal => Err(CliError::Validation(
            "universal mode needs noise refresh between circuits; pass --refresh-oracle".into(),
        )),
        None => Ok(Box::new(NoopRefresher)),
    }
}

fn read_store(path: &Path) -> Result<CiphertextStore, CliError> {
    if starts_with_secret_magic(path)? {
        return Err(CliError::Role(format!(
            "{} is a secret key",
            path.display()
        )));
    }
    Ok(format::decode_store(&format::read_file(path)?, None)?)
}

fn de_analyze(
    image: &Path,
    hfid: u32,
    target_ec: Option<usize>,
    payload: PayloadKind,
    seed: u64,
    map_out: Option<&Path>,
    marked_out: Option<&Path>,
) -> Result<(), CliError> {
    let img = pgm::read_pgm(image)?;
    let cfg = EmbedConfig::new(hfid)?;
    let map = build_map(&img, cfg, target_ec)?;
    let ec = map.count();
    let bits: Vec<u8> = match payload {
        PayloadKind::Zero => vec![0; ec],
        PayloadKind::Random => {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..ec).map(|_| r.random_range(0..2)).collect()
        }
    };
    let marked = de::embed_image(&img, &map, &bits)?;
    let back = de::recover_image(&marked, &map, ec)?;
    let ok = de::extract_image(&marked, &map, ec)? == bits;
    println!("pairs={}", img.pair_count());
    println!("ec={ec}");
    println!("psnr1={:.4}", de::psnr(&img, &marked)?);
    println!("psnr2={}", fmt_db(de::psnr(&img, &back)?));
    println!("extraction_ok={ok}");
    if let Some(m) = map_out {
        format::write_file(m, &format::encode_map(&map))?;
    }
    if let Some(m) = marked_out {
        pgm::write_pgm(&marked, m)?;
    }
    Ok(())
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn encrypt(
    image: &Path,
    mode: EmbedMode,
    keys: &Path,
    map: &Path,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let img = pgm::read_pgm(image)?;
    let map = format::decode_map(&format::read_file(map)?)?;
    let (p, pk) = format::decode_public_key(
        &format::read_file(key_path(keys, "server/public.key", PUBLIC_KEY_FILE))?,
        None,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let store = pipeline::encrypt_image(&img, &map, mode, &p, &pk, &mut rng)?;
    format::write_file(out, &format::encode_store(&store))?;
    println!("pairs={} marked={}", store.blocks.len(), store.capacity());
    Ok(())
}

fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index as u64);
    r
}

/// Run `f` over `items` on up to `jobs` threads, keeping order.
fn parallel<T, U, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<U>, CliError>
where
    T: Send,
    U: Send,
    F: Fn(T) -> Result<U, CliError> + Sync,
{
    let jobs = jobs.max(1);
    if jobs == 1 || items.len() < 2 {
        return items.into_iter().map(f).collect();
    }
    let per = items.len().div_ceil(jobs);
    let mut chunks: Vec<Vec<T>> = Vec::new();
    let mut it = items.into_iter().peekable();
    while it.peek().is_some() {
        chunks.push(it.by_ref().take(per).collect());
    }
    let f = &f;
    let results: Vec<Result<Vec<U>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| s.spawn(move || c.into_iter().map(f).collect::<Result<Vec<U>, _>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn print_counters(c: &OpCounters) {
    print!("{}", c.report());
}

#[allow(clippy::too_many_arguments)]
fn embed(
    store_path: &Path,
    payload: &Path,
    dh_key: &Path,
    switch_keys: &Path,
    oracle: Option<&Path>,
    out: &Path,
    seed: u64,
    jobs: usize,
    cap: u32,
) -> Result<(), CliError> {
    refuse_secret_file(dh_key)?;
    refuse_secret_file(payload)?;
    refuse_secret_in_dir(switch_keys)?;
    let mut store = read_store(store_path)?;
    let keys = load_server_keys(switch_keys, &store.profile, true)?;
    let bits = load_payload(payload)?;
    let k = if dh_key.exists() {
        format::decode_dh_key(&format::read_file(dh_key)?)?
    } else {
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_795f_6b65_795f);
        let k = DataHidingKey::random(bits.len(), &mut r);
        format::write_file(dh_key, &format::encode_dh_key(&k))?;
        k
    };
    if store.embedded != 0 {
        return Err(PipelineError::AlreadyEmbedded(store.embedded).into());
    }
    if bits.len() > store.capacity() {
        return Err(PipelineError::PayloadTooLong {
            bits: bits.len(),
            capacity: store.capacity(),
        }
        .into());
    }
    let scrambled = pipeline::scramble(&bits, &k)?;
    let marked = store.marked_indices();
    let items: Vec<(usize, Block, u8, u8)> = marked
        .iter()
        .zip(bits.iter().zip(&scrambled))
        .map(|(&i, (&b_s, &b_r))| (i, store.blocks[i].clone(), b_s, b_r))
        .collect();
    let refresher = server_refresher(oracle, &store)?;
    let refresher: &dyn Refresher = refresher.as_ref();
    let done = parallel(items, jobs, |(i, mut block, b_s, b_r)| {
        let mut ctx = EvalContext::new(&keys, refresher, pair_rng(seed, i));
        let n = pipeline::embed_block(&mut block, b_s, b_r, &mut ctx, cap)?;
        Ok((i, block, n, ctx.take_counters()))
    })?;
    let mut stats = KsLsbStats::default();
    let mut total = OpCounters::default();
    for (i, block, n, c) in done {
        store.blocks[i] = block;
        stats.counts.push(n);
        total += c;
    }
    store.embedded = bits.len();
    format::write_file(out, &format::encode_store(&store))?;
    println!("embedded={}", bits.len());
    println!("kslsb_mean={:.4}", stats.mean());
    print_counters(&total);
    Ok(())
}

/// A payload container, or any other file read as raw bytes, LSB first.
fn load_payload(path: &Path) -> Result<Vec<u8>, CliError> {
    let buf = format::read_file(path)?;
    if buf.starts_with(format::PAYLOAD_MAGIC) {
        return Ok(format::decode_bits(&buf)?);
    }
    Ok(buf
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (b >> i) & 1))
        .collect())
}

fn extract_ct(store_path: &Path, dh_key: &Path, out: &Path) -> Result<(), CliError> {
    refuse_secret_file(dh_key)?;
    let store = read_store(store_path)?;
    let k = format::decode_dh_key(&format::read_file(dh_key)?)?;
    if k.len() != store.embedded {
        return Err(CliError::Validation(format!(
            "data-hiding key has {} bits, store carries {}",
            k.len(),
            store.embedded
        )));
    }
    let bits = pipeline::extract_ct(&store, &k)?;
    format::write_file(out, &format::encode_bits(&bits))?;
    println!("extracted={}", bits.len());
    Ok(())
}

fn recover_ct(
    store_path: &Path,
    switch_keys: &Path,
    oracle: Option<&Path>,
    out: &Path,
    seed: u64,
    jobs: usize,
) -> Result<(), CliError> {
    refuse_secret_in_dir(switch_keys)?;
    let mut store = read_store(store_path)?;
    let keys = load_server_keys(switch_keys, &store.profile, false)?;
    let marked = store.marked_indices();
    let items: Vec<(usize, Block)> = marked[..store.embedded]
        .iter()
        .map(|&i| (i, store.blocks[i].clone()))
        .collect();
    let refresher = server_refresher(oracle, &store)?;
    let refresher: &dyn Refresher = refresher.as_ref();
    let done = parallel(items, jobs, |(i, mut block)| {
        let mut ctx = EvalContext::new(&keys, refresher, pair_rng(seed, i));
        pipeline::recover_block(&mut block, &mut ctx)?;
        Ok((i, block, ctx.take_counters()))
    })?;
    let mut total = OpCounters::default();
    for (i, block, c) in done {
        store.blocks[i] = block;
        total += c;
    }
    println!("recovered={}", store.embedded);
    store.embedded = 0;
    format::write_file(out, &format::encode_store(&store))?;
    print_counters(&total);
    Ok(())
}

fn extract_enc(
    store_path: &Path,
    switch_keys: &Path,
    oracle: Option<&Path>,
    out: &Path,
    seed: u64,
    jobs: usize,
) -> Result<(), CliError> {
    refuse_secret_in_dir(switch_keys)?;
    let store = read_store(store_path)?;
    let keys = load_server_keys(switch_keys, &store.profile, false)?;
    let marked = store.marked_indices();
    let items: Vec<usize> = marked[..store.embedded].to_vec();
    let refresher = server_refresher(oracle, &store)?;
    let refresher: &dyn Refresher = refresher.as_ref();
    let done = parallel(items, jobs, |i| {
        let mut ctx = EvalContext::new(&keys, refresher, pair_rng(seed, i));
        let c = pipeline::extract_block(&store.blocks[i], &mut ctx)?;
        Ok((c, ctx.take_counters()))
    })?;
    let mut total = OpCounters::default();
    let mut bits = Vec::with_capacity(done.len());
    for (c, k) in done {
        bits.push(c);
        total += k;
    }
    format::write_file(out, &format::encode_bit_ciphertexts(&store.profile, &bits))?;
    println!("extracted={}", bits.len());
    print_counters(&total);
    Ok(())
}

fn decrypt(input: &Path, keys: &Path, out: &Path, map_out: Option<&Path>) -> Result<(), CliError> {
    let (p, sk) = format::decode_secret_key(
        &format::read_file(key_path(keys, SECRET_KEY_FILE, "secret.key"))?,
        None,
    )?;
    let buf = format::read_file(input)?;
    if format::is_bit_list(&buf) {
        let (_, cts) = format::decode_bit_ciphertexts(&buf, Some(&p))?;
        let bits = pipeline::decrypt_bits(&sk, &cts);
        format::write_file(out, &format::encode_bits(&bits))?;
        println!("bits={}", bits.len());
        return Ok(());
    }
    let store = format::decode_store(&buf, Some(&p))?;
    let img = pipeline::decrypt_image(&store, &sk)?;
    pgm::write_pgm(&img, out)?;
    if let Some(m) = map_out {
        format::write_file(m, &format::encode_map(&store.map))?;
    }
    println!("embedded={}", store.embedded);
    Ok(())
}

fn load_image_and_map(image: &Path, map: &Path) -> Result<(Image, de::AvailabilityMap), CliError> {
    let img = pgm::read_pgm(image)?;
    let map = format::decode_map(&format::read_file(map)?)?;
    Ok((img, map))
}

fn de_extract(image: &Path, map: &Path, count: Option<usize>, out: &Path) -> Result<(), CliError> {
    let (img, map) = load_image_and_map(image, map)?;
    let n = count.unwrap_or(map.count());
    let bits = de::extract_image(&img, &map, n)?;
    format::write_file(out, &format::encode_bits(&bits))?;
    println!("extracted={}", bits.len());
    Ok(())
}

fn de_recover(image: &Path, map: &Path, count: Option<usize>, out: &Path) -> Result<(), CliError> {
    let (img, map) = load_image_and_map(image, map)?;
    let n = count.unwrap_or(map.count());
    let back = de::recover_image(&img, &map, n)?;
    pgm::write_pgm(&back, out)?;
    println!("recovered={n}");
    Ok(())
}

fn time_per<F: FnMut()>(iters: usize, mut f: F) -> f64 {
    let t = Instant::now();
    for _ in 0..iters {
        f();
    }
    t.elapsed().as_secs_f64() * 1e6 / iters.max(1) as f64
}

fn bench(profile: Option<&str>, seed: u64, iters: usize) -> Result<(), CliError> {
    let p = config::profile_from_flag_or_env(profile)?;
    let iters = iters.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Instant::now();
    let ks = KeySet::generate(&p, &mut rng);
    let keygen_us = t.elapsed().as_secs_f64() * 1e6;
    let refresher = TrustedRefresher::new(ks.secret.clone());
    let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(seed + 1));
    let c1 = ctx.encrypt(1);
    let c0 = ctx.encrypt(0);
    let mut rows: Vec<(&str, f64)> = vec![("keygen", keygen_us)];
    rows.push((
        "encrypt_bit",
        time_per(iters, || {
            ctx.encrypt(1);
        }),
    ));
    rows.push((
        "decrypt_bit",
        time_per(iters, || {
            lwe::dec(&ks.secret, &c1);
        }),
    ));
    rows.push((
        "hadd",
        time_per(iters, || {
            ctx.hadd(&c1, &c0).unwrap();
        }),
    ));
    rows.push((
        "hmul_with_keyswitch",
        time_per(iters, || {
            ctx.hmul(&c1, &c0).unwrap();
        }),
    ));
    rows.push((
        "keyswitch_lsb",
        time_per(iters, || {
            ctx.lsb_switch(&c1).unwrap();
        }),
    ));
    rows.push((
        "refresh",
        time_per(iters, || {
            ctx.refresh(&c1);
        }),
    ));
    let lsb = ks.server.lsb.as_ref().unwrap();
    let mut flip = 0u8;
    rows.push((
        "kslsb_embed",
        time_per(iters, || {
            flip ^= 1;
            pipeline::kslsb_embed(&c1, flip, lsb, KSLSB_CAP).unwrap();
        }),
    ));
    let x = EncryptedByte::encrypt(&p, &ks.server.public, 200, &mut rng);
    let y = EncryptedByte::encrypt(&p, &ks.server.public, 55, &mut rng);
    let few = iters.div_ceil(10);
    rows.push((
        "add8",
        time_per(few, || {
            add8(&mut ctx, &x, &y).unwrap();
        }),
    ));
    rows.push((
        "sub8",
        time_per(few, || {
            sub8(&mut ctx, &x, &y).unwrap();
        }),
    ));
    println!("profile n={} q={} d={}", p.n, p.q, p.d);
    println!("{:<22}{:>14}", "operation", "microseconds");
    for (name, us) in rows {
        println!("{name:<22}{us:>14.1}");
    }
    Ok(())
}

struct Expect {
    name: &'static str,
    counters: OpCounters,
    mults: u64,
    keyswitches: u64,
    events: u64,
}

fn report(profile: Option<&str>, seed: u64) -> Result<(), CliError> {
    let p = config::profile_from_flag_or_env(profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks = KeySet::generate(&p, &mut rng);
    let refresher = TrustedRefresher::new(ks.secret.clone());
    let refresher: &dyn Refresher = &refresher;
    let mut ctx = EvalContext::new(&ks.server, refresher, ChaCha8Rng::seed_from_u64(seed + 1));
    let enc = |v: u8, r: &mut ChaCha8Rng| EncryptedByte::encrypt(&p, &ks.server.public, v, r);
    let (x, y) = (enc(9, &mut rng), enc(4, &mut rng));
    let mut rows = Vec::new();

    add8(&mut ctx, &x, &y)?;
    rows.push(Expect {
        name: "add8",
        counters: ctx.take_counters(),
        mults: 84,
        keyswitches: 84,
        events: 9,
    });
    sub8(&mut ctx, &x, &y)?;
    rows.push(Expect {
        name: "sub8",
        counters: ctx.take_counters(),
        mults: 84,
        keyswitches: 84,
        events: 9,
    });
    let pair = EncryptedPixelPair {
        cx: x.clone(),
        cy: y.clone(),
    };
    let c1 = ctx.encrypt(1);
    ctx.take_counters();
    let marked = pipeline::fheede_hide_universal(&pair, &c1, &mut ctx)?;
    rows.push(Expect {
        name: "hide_universal",
        counters: ctx.take_counters(),
        mults: 6 * 84,
        keyswitches: 6 * 84,
        events: 6 * 9,
    });
    pipeline::fheede_recover_universal(&marked, &mut ctx)?;
    rows.push(Expect {
        name: "recover_universal",
        counters: ctx.take_counters(),
        mults: 5 * 84,
        keyswitches: 5 * 84,
        events: 5 * 9,
    });
    pipeline::fheede_extract(&marked, &mut ctx)?;
    rows.push(Expect {
        name: "extract_universal",
        counters: ctx.take_counters(),
        mults: 84,
        keyswitches: 84,
        events: 9,
    });
    let hl = EncryptedHL {
        ch: enc(5, &mut rng),
        cl: enc(6, &mut rng),
    };
    let c1 = ctx.encrypt(1);
    ctx.take_counters();
    let m = pipeline::fheede_hide_efficient(&hl, &c1, &mut ctx)?;
    rows.push(Expect {
        name: "hide_efficient",
        counters: ctx.take_counters(),
        mults: 84,
        keyswitches: 84,
        events: 9,
    });
    pipeline::fheede_recover_efficient(&m, &mut ctx);
    pipeline::fheede_extract_efficient(&m);
    rows.push(Expect {
        name: "recover_extract_efficient",
        counters: ctx.take_counters(),
        mults: 0,
        keyswitches: 0,
        events: 0,
    });

    println!(
        "{:<27}{:>7}{:>7}{:>8}{:>8}{:>8}{:>12}{:>6}",
        "circuit", "mults", "ks", "events", "pk", "adds", "table_adds", ""
    );
    let mut all = true;
    for r in &rows {
        let c = &r.counters;
        let ok = c.mults == r.mults
            && c.keyswitches == r.keyswitches
            && c.refresh_events == r.events
            && c.pk_consumed == r.keyswitches + r.events;
        all &= ok;
        println!(
            "{:<27}{:>7}{:>7}{:>8}{:>8}{:>8}{:>12}{:>6}",
            r.name,
            c.mults,
            c.keyswitches,
            c.refresh_events,
            c.pk_consumed,
            c.adds,
            c.table_adds,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if !all {
        return Err(CliError::Runtime(
            "counters differ from the expected table".into(),
        ));
    }
    Ok(())
}
