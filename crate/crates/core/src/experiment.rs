//! Two cold-reset rounds of BAC, chip authentication and a protected read
//! of the first 128 bytes of DG14. Reusing the ephemeral key makes the
//! rounds' shared keys and protected responses coincide.

use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::apdu::encode_read_binary_sfi;
use crate::chip_auth::parse_dg14;
use crate::group::Scalar;
use crate::mrz::MrzKey;
use crate::protocol::RdeError;
use crate::reader::{Reader, ReaderError, Transcript};
use crate::sim::{CardHarness, SFI_DG14};

pub const READ_LEN: u16 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Differ,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Match => "MATCH",
            Verdict::Differ => "DIFFER",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Round {
    pub shared_secret: Vec<u8>,
    pub rb: Vec<u8>,
    pub m: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub mem: bool,
    pub rounds: [Round; 2],
    pub transcript: Transcript,
}

impl ExperimentReport {
    pub fn verdict(&self) -> Verdict {
        if self.rounds[0].m == self.rounds[1].m {
            Verdict::Match
        } else {
            Verdict::Differ
        }
    }

    /// Reused key should match, fresh keys should differ.
    pub fn as_expected(&self) -> bool {
        self.verdict() == if self.mem { Verdict::Match } else { Verdict::Differ }
    }
}

pub fn run_experiment<C, R>(card: &mut C, mrz: &MrzKey, mem: bool, rng: &mut R) -> Result<ExperimentReport, RdeError>
where
    C: CardHarness + ?Sized,
    R: RngCore + CryptoRng,
{
    let mut reader = Reader::new(card);
    let mut k: Option<Scalar> = None;
    let mut rounds = Vec::with_capacity(2);
    for round in 1..=2 {
        reader.transcript.set_round(round);
        reader.reset();
        reader.select_application()?;
        reader.basic_access_control(mrz, rng)?;
        let dg14_bytes = reader.read_file(SFI_DG14)?;
        let dg14 = parse_dg14(&dg14_bytes).map_err(|_| RdeError::MalformedDocument("DG14"))?;

        let key = match (&k, mem) {
            (Some(k), true) => k.clone(),
            _ => dg14.params().random_scalar(rng),
        };
        let ca = reader.chip_authenticate(&dg14, &key)?;
        k = Some(key);
        reader.transcript.log(None, "K", ca.shared_secret.as_bytes());
        reader.transcript.log(None, "KS_enc", ca.session.ks_enc());
        reader.transcript.log(None, "KS_mac", ca.session.ks_mac());

        let command = encode_read_binary_sfi(SFI_DG14, 0, READ_LEN).expect("constant command");
        let protected = reader
            .session()
            .cloned()
            .ok_or(ReaderError::NoSession)?
            .protect_command(&command)
            .map_err(ReaderError::from)?
            .encode();
        let (m, plain) = reader.exchange_protected(&command)?;
        if !plain.sw.is_ok() || plain.data != dg14_bytes[..READ_LEN as usize] {
            return Err(RdeError::Card(ReaderError::MalformedResponse));
        }
        reader.transcript.log(None, "M", &m);
        rounds.push(Round {
            shared_secret: ca.shared_secret.as_bytes().to_vec(),
            rb: protected,
            m,
        });
    }
    let rounds: [Round; 2] = rounds.try_into().expect("two rounds");
    Ok(ExperimentReport {
        mem,
        rounds,
        transcript: reader.transcript,
    })
}
