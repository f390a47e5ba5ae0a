//! Catalog of the seventeen external quality characteristics.
//!
//! Characteristics are grouped in three categories derived from how their
//! requirements arise: functional requirements identified up front
//! ([`Category::Functionality`]), context-dependent change requests
//! ([`Category::Adaptability`]) and time-dependent change requests
//! ([`Category::Evolutivity`]). Each characteristic lists the maturity models an
//! assessor may use to place an organization on the five-level scale.
//!
//! The catalog is static and ordered; [`list_characteristics`] always returns
//! the same sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CharacteristicId {
    Functionality,
    Interoperability,
    Security,
    Compliance,
    InterAlignmentAbility,
    Adaptability,
    Portability,
    Coexistence,
    Replaceability,
    Flexibility,
    Variability,
    Evolutivity,
    Changeability,
    Maintainability,
    Stability,
    Testability,
    Extensibility,
}

impl CharacteristicId {
    /// All characteristics in catalog order.
    pub const ALL: [CharacteristicId; 17] = [
        CharacteristicId::Functionality,
        CharacteristicId::Interoperability,
        CharacteristicId::Security,
        CharacteristicId::Compliance,
        CharacteristicId::InterAlignmentAbility,
        CharacteristicId::Adaptability,
        CharacteristicId::Portability,
        CharacteristicId::Coexistence,
        CharacteristicId::Replaceability,
        CharacteristicId::Flexibility,
        CharacteristicId::Variability,
        CharacteristicId::Evolutivity,
        CharacteristicId::Changeability,
        CharacteristicId::Maintainability,
        CharacteristicId::Stability,
        CharacteristicId::Testability,
        CharacteristicId::Extensibility,
    ];

    pub fn token(self) -> &'static str {
        match self {
            CharacteristicId::Functionality => "Functionality",
            CharacteristicId::Interoperability => "Interoperability",
            CharacteristicId::Security => "Security",
            CharacteristicId::Compliance => "Compliance",
            CharacteristicId::InterAlignmentAbility => "InterAlignmentAbility",
            CharacteristicId::Adaptability => "Adaptability",
            CharacteristicId::Portability => "Portability",
            CharacteristicId::Coexistence => "Coexistence",
            CharacteristicId::Replaceability => "Replaceability",
            CharacteristicId::Flexibility => "Flexibility",
            CharacteristicId::Variability => "Variability",
            CharacteristicId::Evolutivity => "Evolutivity",
            CharacteristicId::Changeability => "Changeability",
            CharacteristicId::Maintainability => "Maintainability",
            CharacteristicId::Stability => "Stability",
            CharacteristicId::Testability => "Testability",
            CharacteristicId::Extensibility => "Extensibility",
        }
    }

    /// Human-readable name, e.g. "inter alignment ability".
    pub fn display_name(self) -> &'static str {
        match self {
            CharacteristicId::Functionality => "functionality",
            CharacteristicId::Interoperability => "interoperability",
            CharacteristicId::Security => "security",
            CharacteristicId::Compliance => "compliance",
            CharacteristicId::InterAlignmentAbility => "inter alignment ability",
            CharacteristicId::Adaptability => "adaptability",
            CharacteristicId::Portability => "portability",
            CharacteristicId::Coexistence => "co-existence",
            CharacteristicId::Replaceability => "replaceability",
            CharacteristicId::Flexibility => "flexibility",
            CharacteristicId::Variability => "variability",
            CharacteristicId::Evolutivity => "evolutivity",
            CharacteristicId::Changeability => "changeability",
            CharacteristicId::Maintainability => "maintainability",
            CharacteristicId::Stability => "stability",
            CharacteristicId::Testability => "testability",
            CharacteristicId::Extensibility => "extensibility",
        }
    }

    pub fn category(self) -> Category {
        use CharacteristicId::*;
        match self {
            Functionality | Interoperability | Security | Compliance | InterAlignmentAbility => {
                Category::Functionality
            }
            Adaptability | Portability | Coexistence | Replaceability | Flexibility
            | Variability => Category::Adaptability,
            Evolutivity | Changeability | Maintainability | Stability | Testability
            | Extensibility => Category::Evolutivity,
        }
    }

    /// True for the three characteristics that also name their category.
    pub fn is_category_head(self) -> bool {
        self.token() == self.category().token()
    }
}

impl fmt::Display for CharacteristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CharacteristicId {
    type Err = Error;

    /// Accepts the canonical token case-insensitively, ignoring `-`, `_` and spaces,
    /// so "inter-alignment-ability" and "InterAlignmentAbility" are equivalent.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        CharacteristicId::ALL
            .into_iter()
            .find(|c| c.token().to_lowercase() == wanted)
            .ok_or_else(|| Error::invalid("characteristic", format!("unknown characteristic `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Functionality,
    Adaptability,
    Evolutivity,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::Functionality,
        Category::Adaptability,
        Category::Evolutivity,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Category::Functionality => "Functionality",
            Category::Adaptability => "Adaptability",
            Category::Evolutivity => "Evolutivity",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Category::Functionality => {
                "Qualities tied to the essential purpose of the cooperating systems, identified with the initial requirements"
            }
            Category::Adaptability => "Qualities driven by context-dependent change requests",
            Category::Evolutivity => "Qualities driven by change requests that arrive over time",
        }
    }

    pub fn members(self) -> impl Iterator<Item = CharacteristicId> {
        CharacteristicId::ALL
            .into_iter()
            .filter(move |c| c.category() == self)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MaturityModelRef {
    pub short_name: &'static str,
    pub full_name: &'static str,
}

const FMMI: MaturityModelRef = MaturityModelRef {
    short_name: "FMMI",
    full_name: "Functionality Maturity Model Integration",
};
const IMM: MaturityModelRef = MaturityModelRef {
    short_name: "IMM",
    full_name: "Interoperability Maturity Model",
};
const EIMM: MaturityModelRef = MaturityModelRef {
    short_name: "EIMM",
    full_name: "Enterprise Interoperability Maturity Model",
};
const OIMM: MaturityModelRef = MaturityModelRef {
    short_name: "OIMM",
    full_name: "Organizational Interoperability Maturity Model",
};
const LISI: MaturityModelRef = MaturityModelRef {
    short_name: "LISI",
    full_name: "Levels of Information Systems Interoperability",
};
const ISMM: MaturityModelRef = MaturityModelRef {
    short_name: "ISMM",
    full_name: "Information Security Maturity Model",
};
const GOCOMM: MaturityModelRef = MaturityModelRef {
    short_name: "GoCoMM",
    full_name: "Governance and Compliance Maturity Model",
};
const IAMM: MaturityModelRef = MaturityModelRef {
    short_name: "IAMM",
    full_name: "Inter-Alignment Ability Maturity Model",
};
const QMM: MaturityModelRef = MaturityModelRef {
    short_name: "QMM",
    full_name: "Quality Maturity Model",
};
const AMMI: MaturityModelRef = MaturityModelRef {
    short_name: "AMMI",
    full_name: "Adaptability Maturity Model Integration",
};
const PMMI: MaturityModelRef = MaturityModelRef {
    short_name: "PMMI",
    full_name: "Portability Maturity Model Integration",
};
const FMM: MaturityModelRef = MaturityModelRef {
    short_name: "FMM",
    full_name: "Flexibility Maturity Model",
};
const AM3: MaturityModelRef = MaturityModelRef {
    short_name: "AM3",
    full_name: "Architecture Maintainability Maturity Model",
};
const TMM: MaturityModelRef = MaturityModelRef {
    short_name: "TMM",
    full_name: "Testability Maturity Model",
};

/// Maturity models registered for a characteristic, in registry order.
pub fn maturity_models_for(c: CharacteristicId) -> &'static [MaturityModelRef] {
    use CharacteristicId::*;
    match c {
        Functionality => &[FMMI],
        Interoperability => &[IMM, EIMM, OIMM, LISI],
        Security => &[ISMM],
        Compliance => &[GOCOMM],
        InterAlignmentAbility => &[IAMM],
        Adaptability => &[QMM, AMMI],
        Portability => &[PMMI],
        Coexistence => &[QMM],
        Replaceability => &[QMM],
        Flexibility => &[FMM],
        Variability => &[QMM],
        Evolutivity => &[QMM],
        Changeability => &[QMM],
        Maintainability => &[AM3, QMM],
        Stability => &[QMM],
        Testability => &[TMM],
        Extensibility => &[QMM],
    }
}

/// Every characteristic with its category, in catalog order.
pub fn list_characteristics() -> Vec<(CharacteristicId, Category)> {
    CharacteristicId::ALL
        .into_iter()
        .map(|c| (c, c.category()))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: CharacteristicId,
    pub display_name: &'static str,
    pub category: Category,
    pub is_category_head: bool,
    pub maturity_models: &'static [MaturityModelRef],
}

#[derive(Clone, Debug, Serialize)]
pub struct CategoryEntry {
    pub name: Category,
    pub description: &'static str,
    pub members: Vec<CharacteristicId>,
}

/// Machine-readable dump of the whole catalog.
#[derive(Clone, Debug, Serialize)]
pub struct Catalog {
    pub categories: Vec<CategoryEntry>,
    pub characteristics: Vec<CatalogEntry>,
}

pub fn catalog() -> Catalog {
    Catalog {
        categories: Category::ALL
            .into_iter()
            .map(|name| CategoryEntry {
                name,
                description: name.description(),
                members: name.members().collect(),
            })
            .collect(),
        characteristics: CharacteristicId::ALL
            .into_iter()
            .map(|id| CatalogEntry {
                id,
                display_name: id.display_name(),
                category: id.category(),
                is_category_head: id.is_category_head(),
                maturity_models: maturity_models_for(id),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn short_names(c: CharacteristicId) -> Vec<&'static str> {
        maturity_models_for(c).iter().map(|m| m.short_name).collect()
    }

    #[test]
    fn listing_starts_with_functionality_and_has_seventeen_entries() {
        let list = list_characteristics();
        assert_eq!(list.len(), 17);
        assert_eq!(list[0], (CharacteristicId::Functionality, Category::Functionality));
        assert!(list.contains(&(CharacteristicId::Flexibility, Category::Adaptability)));
        assert!(list.contains(&(CharacteristicId::Testability, Category::Evolutivity)));
        assert_eq!(list, list_characteristics());
    }

    #[test]
    fn categories_partition_the_catalog() {
        let mut seen = BTreeSet::new();
        for cat in Category::ALL {
            for c in cat.members() {
                assert!(seen.insert(c), "{c} appears in two categories");
            }
        }
        assert_eq!(seen.len(), 17);

        let functionality: Vec<_> = Category::Functionality.members().collect();
        assert_eq!(
            functionality,
            [
                CharacteristicId::Functionality,
                CharacteristicId::Interoperability,
                CharacteristicId::Security,
                CharacteristicId::Compliance,
                CharacteristicId::InterAlignmentAbility,
            ]
        );
        assert_eq!(Category::Adaptability.members().count(), 6);
        assert_eq!(Category::Evolutivity.members().count(), 6);
    }

    #[test]
    fn maturity_model_rows() {
        assert_eq!(
            short_names(CharacteristicId::Interoperability),
            ["IMM", "EIMM", "OIMM", "LISI"]
        );
        assert_eq!(short_names(CharacteristicId::Security), ["ISMM"]);
        assert_eq!(short_names(CharacteristicId::Variability), ["QMM"]);
        assert_eq!(short_names(CharacteristicId::Maintainability), ["AM3", "QMM"]);
        for c in CharacteristicId::ALL {
            assert!(!maturity_models_for(c).is_empty(), "{c} has no maturity model");
        }
    }

    #[test]
    fn category_heads() {
        let heads: Vec<_> = CharacteristicId::ALL
            .into_iter()
            .filter(|c| c.is_category_head())
            .collect();
        assert_eq!(
            heads,
            [
                CharacteristicId::Functionality,
                CharacteristicId::Adaptability,
                CharacteristicId::Evolutivity,
            ]
        );
    }

    #[test]
    fn parses_tokens_leniently_and_rejects_unknown() {
        assert_eq!(
            "inter-alignment-ability".parse::<CharacteristicId>().unwrap(),
            CharacteristicId::InterAlignmentAbility
        );
        assert_eq!(
            "Security".parse::<CharacteristicId>().unwrap(),
            CharacteristicId::Security
        );
        let err = "Usability".parse::<CharacteristicId>().unwrap_err();
        assert!(err.to_string().contains("Usability"));
        for c in CharacteristicId::ALL {
            assert_eq!(c.token().parse::<CharacteristicId>().unwrap(), c);
        }
    }
}
