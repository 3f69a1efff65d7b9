//! Machine readable zone: check digits, the BAC key string, and TD1/TD3
//! layouts.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MrzError {
    #[error("invalid MRZ character {0:?}")]
    InvalidCharacter(char),
    #[error("unrecognised MRZ length {0}")]
    UnknownLayout(usize),
    #[error("check digit mismatch in {0}")]
    CheckDigit(&'static str),
    #[error("invalid field {0}")]
    InvalidField(&'static str),
}

fn char_value(c: char) -> Result<u32, MrzError> {
    match c {
        '0'..='9' => Ok(c as u32 - '0' as u32),
        'A'..='Z' => Ok(c as u32 - 'A' as u32 + 10),
        '<' => Ok(0),
        _ => Err(MrzError::InvalidCharacter(c)),
    }
}

/// ICAO 7-3-1 weighted check digit.
pub fn check_digit(field: &str) -> Result<char, MrzError> {
    let mut sum = 0;
    for (i, c) in field.chars().enumerate() {
        sum += char_value(c)? * [7, 3, 1][i % 3];
    }
    Ok(char::from_digit(sum % 10, 10).expect("single digit"))
}

fn verify(field: &str, digit: char, name: &'static str) -> Result<(), MrzError> {
    if check_digit(field)? == digit {
        Ok(())
    } else {
        Err(MrzError::CheckDigit(name))
    }
}

fn is_date(s: &str) -> bool {
    s.len() == 6 && s.bytes().all(|b| b.is_ascii_digit())
}

/// The three MRZ fields that key Basic Access Control.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrzKey {
    /// Up to nine characters, without filler.
    pub document_number: String,
    /// YYMMDD
    pub date_of_birth: String,
    /// YYMMDD
    pub date_of_expiry: String,
}

impl MrzKey {
    pub fn new(document_number: &str, date_of_birth: &str, date_of_expiry: &str) -> Result<Self, MrzError> {
        let document_number = document_number.trim_end_matches('<').to_string();
        if document_number.is_empty() || document_number.len() > 9 {
            return Err(MrzError::InvalidField("document number"));
        }
        for c in document_number.chars() {
            char_value(c)?;
        }
        if !is_date(date_of_birth) {
            return Err(MrzError::InvalidField("date of birth"));
        }
        if !is_date(date_of_expiry) {
            return Err(MrzError::InvalidField("date of expiry"));
        }
        Ok(MrzKey {
            document_number,
            date_of_birth: date_of_birth.to_string(),
            date_of_expiry: date_of_expiry.to_string(),
        })
    }

    fn padded_number(&self) -> String {
        format!("{:<<9}", self.document_number)
    }

    /// `number‖cd‖dob‖cd‖expiry‖cd`, the 24-character BAC key input.
    pub fn bac_string(&self) -> String {
        let n = self.padded_number();
        format!(
            "{n}{}{}{}{}{}",
            check_digit(&n).expect("validated"),
            self.date_of_birth,
            check_digit(&self.date_of_birth).expect("validated"),
            self.date_of_expiry,
            check_digit(&self.date_of_expiry).expect("validated"),
        )
    }

    /// Accepts the 24-character key string or a full TD1 (3×30) or TD3
    /// (2×44) MRZ; whitespace is ignored.
    pub fn parse(text: &str) -> Result<Self, MrzError> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if !s.is_ascii() {
            return Err(MrzError::InvalidField("non-ASCII"));
        }
        let (num, num_cd, dob, dob_cd, exp, exp_cd) = match s.len() {
            24 => (&s[0..9], &s[9..10], &s[10..16], &s[16..17], &s[17..23], &s[23..24]),
            90 => (&s[5..14], &s[14..15], &s[30..36], &s[36..37], &s[38..44], &s[44..45]),
            88 => (&s[44..53], &s[53..54], &s[57..63], &s[63..64], &s[65..71], &s[71..72]),
            n => return Err(MrzError::UnknownLayout(n)),
        };
        let first = |f: &str| f.chars().next().expect("one char");
        verify(num, first(num_cd), "document number")?;
        verify(dob, first(dob_cd), "date of birth")?;
        verify(exp, first(exp_cd), "date of expiry")?;
        MrzKey::new(num, dob, exp)
    }
}

/// Printed identity fields of a TD3 passport MRZ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Td3 {
    pub issuing_state: String,
    pub holder_name: String,
    pub nationality: String,
    pub sex: char,
    pub key: MrzKey,
}

impl Td3 {
    /// Two 44-character lines.
    pub fn lines(&self) -> (String, String) {
        let name_field: String = format!("{:<<39}", self.holder_name.replace(' ', "<"))
            .chars()
            .take(39)
            .collect();
        let line1 = format!("P<{:<<3}{name_field}", self.issuing_state);
        let n = self.key.padded_number();
        let optional = "<".repeat(14);
        let part_number = format!("{n}{}", check_digit(&n).expect("valid"));
        let part_dob = format!(
            "{}{}",
            self.key.date_of_birth,
            check_digit(&self.key.date_of_birth).expect("valid")
        );
        let part_exp = format!(
            "{}{}",
            self.key.date_of_expiry,
            check_digit(&self.key.date_of_expiry).expect("valid")
        );
        let part_opt = format!("{optional}{}", check_digit(&optional).expect("valid"));
        let composite = check_digit(&format!("{part_number}{part_dob}{part_exp}{part_opt}")).expect("valid");
        let line2 = format!(
            "{part_number}{:<<3}{part_dob}{}{part_exp}{part_opt}{composite}",
            self.nationality, self.sex
        );
        (line1, line2)
    }

    pub fn text(&self) -> String {
        let (a, b) = self.lines();
        format!("{a}{b}")
    }

    pub fn parse(text: &str) -> Result<Self, MrzError> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.len() != 88 || !s.is_ascii() {
            return Err(MrzError::UnknownLayout(s.len()));
        }
        let key = MrzKey::parse(&s)?;
        let (line1, line2) = s.split_at(44);
        let composite_input = format!("{}{}{}", &line2[0..10], &line2[13..20], &line2[21..43]);
        verify(&composite_input, line2.as_bytes()[43] as char, "composite")?;
        Ok(Td3 {
            issuing_state: line1[2..5].trim_end_matches('<').to_string(),
            holder_name: line1[5..].trim_end_matches('<').to_string(),
            nationality: line2[10..13].trim_end_matches('<').to_string(),
            sex: line2.as_bytes()[20] as char,
            key,
        })
    }
}
