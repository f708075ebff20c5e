use std::fmt;

use serde::{Deserialize, Serialize};

/// Carried-object classes, each predicted by an independent binary head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Laptop,
    Phone,
    Knife,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [ObjectClass::Laptop, ObjectClass::Phone, ObjectClass::Knife];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Laptop => "laptop",
            ObjectClass::Phone => "phone",
            ObjectClass::Knife => "knife",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ObjectClass::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-truth presence flags in `(laptop, phone, knife)` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels(pub [bool; 3]);

impl Labels {
    pub fn from_classes(classes: &[ObjectClass]) -> Self {
        let mut flags = [false; 3];
        for c in classes {
            flags[c.index()] = true;
        }
        Labels(flags)
    }

    pub fn has(&self, class: ObjectClass) -> bool {
        self.0[class.index()]
    }

    pub fn none(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    /// Three-character code such as `100` for a laptop-only sample.
    pub fn code(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_code(code: &str) -> Option<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 {
            return None;
        }
        let mut flags = [false; 3];
        for (flag, &b) in flags.iter_mut().zip(bytes) {
            *flag = match b {
                b'0' => false,
                b'1' => true,
                _ => return None,
            };
        }
        Some(Labels(flags))
    }
}
