//! Fixed label sets. Declaration order is the tie-break order everywhere.

use std::fmt;
use std::str::FromStr;

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $count:expr, [$($variant:ident => $text:expr),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const COUNT: usize = $count;
            pub const ALL: [$name; $count] = [$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} label `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

label_enum!(
    /// Top-level categories of the urban sound taxonomy.
    SoundCategory, 6, [
        Transport => "transport",
        Mechanical => "mechanical",
        Human => "human",
        Music => "music",
        Nature => "nature",
        Indoor => "indoor",
    ]
);

label_enum!(
    /// Plutchik's eight primary emotions.
    Emotion, 8, [
        Anger => "anger",
        Fear => "fear",
        Anticipation => "anticipation",
        Trust => "trust",
        Surprise => "surprise",
        Sadness => "sadness",
        Joy => "joy",
        Disgust => "disgust",
    ]
);

label_enum!(
    /// Sound sources rated during soundwalks.
    WalkSound, 5, [
        Traffic => "traffic",
        Individuals => "individuals",
        Crowds => "crowds",
        Nature => "nature",
        Other => "other",
    ]
);

label_enum!(
    /// Perceptual attributes rated during soundwalks.
    Perception, 8, [
        Pleasant => "pleasant",
        Chaotic => "chaotic",
        Vibrant => "vibrant",
        Uneventful => "uneventful",
        Calm => "calm",
        Annoying => "annoying",
        Eventful => "eventful",
        Monotonous => "monotonous",
    ]
);

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}
