//! `rde`: simulated e-passports, registration, remote document encryption
//! and the ephemeral-key reuse experiment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rde_core::envelope::{EnvelopeError, RdeCiphertext};
use rde_core::experiment::run_experiment;
use rde_core::group::CurveId;
use rde_core::mrz::MrzKey;
use rde_core::passive_auth::IssuerKeypair;
use rde_core::protocol::{
    decrypt_logged, encrypt, read_document, register, security_strength, Consent, ErrorFamily, ExtractionParameters,
    RdeError, RegistrationRecord,
};
use rde_core::reader::Transcript;
use rde_core::sim::{create_passport, PassportProfile, PassportState, SFI_DG14};
use rde_core::sm::CipherSuite;

/// Seed of the document signer shared by `create-passport` and `register`.
const ISSUER_SEED: &[u8] = b"rde demo document signer";

#[derive(Parser)]
#[command(
    name = "rde",
    version,
    about = "Remote document encryption with simulated e-passports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Issue a simulated passport and print its MRZ.
    CreatePassport {
        #[arg(long, value_enum, default_value_t = Suite::Aes256)]
        suite: Suite,
        #[arg(long, value_enum, default_value_t = Curve::Bp320)]
        curve: Curve,
        /// Derive every key from this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Read a passport over BAC, check it, and write a registration record.
    Register {
        #[arg(long)]
        passport: PathBuf,
        /// Document number, birth and expiry with check digits, or the full MRZ.
        #[arg(long)]
        mrz: String,
        /// Bytes of DG14 covered by the protected read.
        #[arg(short, long, default_value_t = 128)]
        n: usize,
        /// Record that the holder agreed to registration.
        #[arg(long)]
        consent: bool,
        #[arg(long, default_value_t = 0)]
        timestamp: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Encrypt a file so that only the registered passport can open it.
    Encrypt {
        #[arg(long)]
        record: PathBuf,
        #[arg(short, long = "in")]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        pin: Option<String>,
        /// Number of protected reads hashed into the key.
        #[arg(long, default_value_t = 1)]
        multi: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decrypt with the passport present.
    Decrypt {
        #[arg(long)]
        passport: PathBuf,
        #[arg(long)]
        mrz: String,
        #[arg(short, long = "in")]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        pin: Option<String>,
        /// Print the card conversation.
        #[arg(long)]
        transcript: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Two cold-reset rounds of chip authentication and a protected DG14 read.
    Experiment {
        #[arg(long)]
        passport: PathBuf,
        /// 1 reuses the ephemeral key in round 2, 0 draws a fresh one.
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        mem: u8,
        #[arg(long)]
        transcript: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Tdes,
    Aes128,
    Aes192,
    Aes256,
}

impl From<Suite> for CipherSuite {
    fn from(s: Suite) -> Self {
        match s {
            Suite::Tdes => CipherSuite::Tdes,
            Suite::Aes128 => CipherSuite::Aes128,
            Suite::Aes192 => CipherSuite::Aes192,
            Suite::Aes256 => CipherSuite::Aes256,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    Bp256,
    Bp320,
}

impl From<Curve> for CurveId {
    fn from(c: Curve) -> Self {
        match c {
            Curve::Bp256 => CurveId::BrainpoolP256r1,
            Curve::Bp320 => CurveId::BrainpoolP320r1,
        }
    }
}

enum Failure {
    Rde(RdeError),
    Usage(String),
    Io(String),
    Unexpected,
}

impl From<RdeError> for Failure {
    fn from(e: RdeError) -> Self {
        Failure::Rde(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Unexpected => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 6,
            Failure::Rde(e) => match e.family() {
                ErrorFamily::Usage => 2,
                ErrorFamily::PassiveAuth => 3,
                ErrorFamily::Bac => 4,
                ErrorFamily::Decryption => 5,
                ErrorFamily::Format => 6,
            },
        }
    }
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_passport(path: &Path) -> Result<PassportState, Failure> {
    PassportState::from_bytes(&read(path)?).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_mrz(text: &str) -> Result<MrzKey, Failure> {
    MrzKey::parse(text).map_err(|e| Failure::Usage(format!("--mrz: {e}")))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::CreatePassport {
            suite,
            curve,
            seed,
            out,
        } => {
            let profile = PassportProfile::specimen(suite.into(), curve.into(), seed);
            let card = create_passport(&profile, &IssuerKeypair::from_seed(ISSUER_SEED), &mut rng(seed));
            write(&out, &card.to_bytes())?;
            let (line1, line2) = card.mrz().lines();
            println!("{line1}\n{line2}");
            println!("MRZ key: {}", card.mrz().key.bac_string());
            let strength = security_strength(card.suite(), card.curve_id().params().q_bits());
            println!(
                "{} over {}, {strength}-bit security",
                card.suite().name(),
                card.curve_id()
            );
        }
        Command::Register {
            passport,
            mrz,
            n,
            consent,
            timestamp,
            seed,
            out,
        } => {
            let mut card = load_passport(&passport)?;
            let doc = read_document(&mut card, &parse_mrz(&mrz)?, &mut rng(seed))?;
            let params = ExtractionParameters::new(n, SFI_DG14, doc.dg14.content.clone())?;
            let consent = Consent {
                given: consent,
                timestamp,
            };
            let trusted = IssuerKeypair::from_seed(ISSUER_SEED).public;
            let record = register(&doc.dg1, &doc.dg14, &doc.sod, params, consent, &trusted)?;
            write(&out, &record.to_bytes())?;
            println!("registered {} ({} bytes of DG14)", record.holder.key.document_number, n);
        }
        Command::Encrypt {
            record,
            input,
            out,
            pin,
            multi,
            seed,
        } => {
            let record = RegistrationRecord::from_bytes(&read(&record)?)?;
            let data = read(&input)?;
            let ct = encrypt(&record, &data, &mut rng(seed), pin.as_deref().map(str::as_bytes), multi)?;
            write(&out, format!("{}\n", ct.to_hex()).as_bytes())?;
        }
        Command::Decrypt {
            passport,
            mrz,
            input,
            out,
            pin,
            transcript,
            seed,
        } => {
            let mut card = load_passport(&passport)?;
            let text = String::from_utf8(read(&input)?).map_err(|_| RdeError::from(EnvelopeError::Hex))?;
            let ct = RdeCiphertext::from_hex(&text).map_err(RdeError::from)?;
            let mut log = Transcript::new();
            log.set_round(1);
            let result = decrypt_logged(
                &ct,
                &mut card,
                &parse_mrz(&mrz)?,
                pin.as_deref().map(str::as_bytes),
                &mut rng(seed),
                &mut log,
            );
            if transcript {
                print!("{log}");
            }
            write(&out, &result?)?;
        }
        Command::Experiment {
            passport,
            mem,
            transcript,
            seed,
        } => {
            let mut card = load_passport(&passport)?;
            let mrz = card.mrz().key.clone();
            let report = run_experiment(&mut card, &mrz, mem == 1, &mut rng(seed))?;
            if transcript {
                print!("{}", report.transcript);
            }
            for (i, round) in report.rounds.iter().enumerate() {
                println!("round {}: K  = {}", i + 1, hex(&round.shared_secret));
                println!("round {}: RB = {}", i + 1, hex(&round.rb));
                println!("round {}: M  = {}", i + 1, hex(&round.m));
            }
            println!("{}", report.verdict());
            if !report.as_expected() {
                return Err(Failure::Unexpected);
            }
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    rde_core::apdu::hex_dump(bytes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Rde(e) => eprintln!("error: {e}"),
                Failure::Usage(m) | Failure::Io(m) => eprintln!("error: {m}"),
                Failure::Unexpected => eprintln!("error: rounds did not behave as expected"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
