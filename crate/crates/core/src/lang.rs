use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// An ISO 639-1 language code such as `en` or `el`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lang([u8; 2]);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid language code {0:?}: expected two ASCII letters")]
pub struct InvalidLang(pub String);

impl Lang {
    pub const EN: Lang = Lang(*b"en");
    pub const FR: Lang = Lang(*b"fr");
    pub const EL: Lang = Lang(*b"el");
    pub const ES: Lang = Lang(*b"es");
    pub const DE: Lang = Lang(*b"de");

    /// Languages with bundled profiles, topic files and site fixtures.
    pub const BUNDLED: [Lang; 5] = [Lang::EN, Lang::FR, Lang::EL, Lang::ES, Lang::DE];

    pub fn new(code: &str) -> Result<Self, InvalidLang> {
        let bytes = code.trim().as_bytes();
        match bytes {
            [a, b] if a.is_ascii_alphabetic() && b.is_ascii_alphabetic() => {
                Ok(Lang([a.to_ascii_lowercase(), b.to_ascii_lowercase()]))
            }
            _ => Err(InvalidLang(code.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII letters by construction.
        std::str::from_utf8(&self.0).expect("ascii language code")
    }

    /// English name of the language, used in URL language markers.
    pub fn english_name(&self) -> Option<&'static str> {
        Some(match self.as_str() {
            "en" => "english",
            "fr" => "french",
            "el" => "greek",
            "es" => "spanish",
            "de" => "german",
            "it" => "italian",
            "pt" => "portuguese",
            "nl" => "dutch",
            _ => return None,
        })
    }

    /// ISO 639-2/T three-letter code, used in URL language markers.
    pub fn iso639_3(&self) -> Option<&'static str> {
        Some(match self.as_str() {
            "en" => "eng",
            "fr" => "fra",
            "el" => "ell",
            "es" => "spa",
            "de" => "deu",
            "it" => "ita",
            "pt" => "por",
            "nl" => "nld",
            _ => return None,
        })
    }
}

impl FromStr for Lang {
    type Err = InvalidLang;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lang::new(s)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
