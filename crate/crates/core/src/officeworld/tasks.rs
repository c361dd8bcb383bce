use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::automaton::SubgoalAutomaton;
use crate::traces::Alphabet;

use super::layout::Item;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Coffee,
    CoffeeMail,
    #[serde(rename = "visit-abcd")]
    VisitAbcd,
}

const COFFEE_AUT: &str = "\
states: u0 u1 uA uR
alphabet: coffee, office, deco
u0 -> u1 : coffee & !office
u0 -> uA : coffee & office
u0 -> uR : deco
u1 -> uA : office
u1 -> uR : deco
";

const COFFEE_MAIL_AUT: &str = "\
states: u0 u1 u2 u3 uA uR
alphabet: coffee, mail, office, deco
u0 -> u1 : coffee & !mail
u0 -> u2 : !coffee & mail
u0 -> u3 : coffee & mail & !office
u0 -> uA : coffee & mail & office
u0 -> uR : deco
u1 -> u3 : mail & !office
u1 -> uA : mail & office
u1 -> uR : deco
u2 -> u3 : coffee & !office
u2 -> uA : coffee & office
u2 -> uR : deco
u3 -> uA : office
u3 -> uR : deco
";

const VISIT_ABCD_AUT: &str = "\
states: u0 u1 u2 u3 uA uR
alphabet: A, B, C, D, deco
u0 -> u1 : A
u0 -> uR : deco
u1 -> u2 : B
u1 -> uR : deco
u2 -> u3 : C
u2 -> uR : deco
u3 -> uA : D
u3 -> uR : deco
";

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Coffee, TaskKind::CoffeeMail, TaskKind::VisitAbcd];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Coffee => "coffee",
            TaskKind::CoffeeMail => "coffee-mail",
            TaskKind::VisitAbcd => "visit-abcd",
        }
    }

    /// Items whose observables the task needs.
    pub fn relevant_items(self) -> &'static [Item] {
        match self {
            TaskKind::Coffee => &[Item::Coffee, Item::Office, Item::Decoration],
            TaskKind::CoffeeMail => &[Item::Coffee, Item::Mail, Item::Office, Item::Decoration],
            TaskKind::VisitAbcd => &[Item::A, Item::B, Item::C, Item::D, Item::Decoration],
        }
    }

    pub fn restricted_alphabet(self) -> Alphabet {
        Alphabet::new(self.relevant_items().iter().map(|i| i.symbol())).expect("distinct symbols")
    }

    /// Hand-written automaton recognising the task over its restricted alphabet.
    pub fn ground_truth(self) -> SubgoalAutomaton {
        let text = match self {
            TaskKind::Coffee => COFFEE_AUT,
            TaskKind::CoffeeMail => COFFEE_MAIL_AUT,
            TaskKind::VisitAbcd => VISIT_ABCD_AUT,
        };
        SubgoalAutomaton::parse(text).expect("bundled automaton is valid")
    }
}

/// Every observable of the OfficeWorld labeling function.
pub fn full_alphabet() -> Alphabet {
    Alphabet::new(Item::ALL.iter().map(|i| i.symbol())).expect("distinct symbols")
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task `{0}` (expected coffee, coffee-mail or visit-abcd)")]
pub struct UnknownTask(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "coffee" => Ok(TaskKind::Coffee),
            "coffee-mail" | "coffeemail" => Ok(TaskKind::CoffeeMail),
            "visit-abcd" | "visitabcd" => Ok(TaskKind::VisitAbcd),
            _ => Err(UnknownTask(s.to_string())),
        }
    }
}
