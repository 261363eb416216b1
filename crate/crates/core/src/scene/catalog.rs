//! The desk-scale object and relation catalog.
//!
//! Ids are stable: they are written into scene files.

use serde::{Deserialize, Serialize};

use super::Roles;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Category {
    pub id: u32,
    pub name: &'static str,
    pub roles: Roles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    OneToOne,
    ManyToMany,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelationType {
    pub type_id: u32,
    pub name: &'static str,
    pub trigger_category: u32,
    pub responder_category: u32,
    pub arity: Arity,
}

impl RelationType {
    /// A type whose trigger and responder category coincide. Under
    /// nearest-first binding each such object binds to itself.
    pub fn is_self(&self) -> bool {
        self.trigger_category == self.responder_category
    }
}

pub mod cat {
    pub const SWITCH: u32 = 0;
    pub const CEILING_LAMP: u32 = 1;
    pub const DESK_LAMP: u32 = 2;
    pub const KNOB: u32 = 3;
    pub const BURNER: u32 = 4;
    pub const REMOTE: u32 = 5;
    pub const TV: u32 = 6;
    pub const SPEAKER: u32 = 7;
    pub const MICROWAVE: u32 = 8;
    pub const KNIFE: u32 = 9;
    pub const FRUIT: u32 = 10;
    pub const HOLDER: u32 = 11;
    pub const TOWEL: u32 = 12;
    pub const FAUCET: u32 = 13;
    pub const BOX: u32 = 14;
    pub const BOOK: u32 = 15;
    pub const PLANT: u32 = 16;
}

const T: Roles = Roles::TRIGGER;
const R: Roles = Roles::RESPONDER;
const TR: Roles = Roles::BOTH;
const BG: Roles = Roles::BACKGROUND;

pub const CATEGORIES: [Category; 17] = [
    Category { id: cat::SWITCH, name: "switch", roles: T },
    Category { id: cat::CEILING_LAMP, name: "ceiling-lamp", roles: R },
    Category { id: cat::DESK_LAMP, name: "desk-lamp", roles: TR },
    Category { id: cat::KNOB, name: "knob", roles: T },
    Category { id: cat::BURNER, name: "burner", roles: R },
    Category { id: cat::REMOTE, name: "remote", roles: T },
    Category { id: cat::TV, name: "tv", roles: R },
    Category { id: cat::SPEAKER, name: "speaker", roles: R },
    Category { id: cat::MICROWAVE, name: "microwave", roles: TR },
    Category { id: cat::KNIFE, name: "knife", roles: T },
    Category { id: cat::FRUIT, name: "fruit", roles: R },
    Category { id: cat::HOLDER, name: "holder", roles: T },
    Category { id: cat::TOWEL, name: "towel", roles: R },
    Category { id: cat::FAUCET, name: "faucet", roles: TR },
    Category { id: cat::BOX, name: "box", roles: BG },
    Category { id: cat::BOOK, name: "book", roles: BG },
    Category { id: cat::PLANT, name: "plant", roles: BG },
];

use Arity::{ManyToMany, OneToOne};

pub const RELATION_TYPES: [RelationType; 10] = [
    RelationType { type_id: 0, name: "switch-ceiling-lamp", trigger_category: cat::SWITCH, responder_category: cat::CEILING_LAMP, arity: OneToOne },
    RelationType { type_id: 1, name: "knob-burner", trigger_category: cat::KNOB, responder_category: cat::BURNER, arity: OneToOne },
    RelationType { type_id: 2, name: "holder-towel", trigger_category: cat::HOLDER, responder_category: cat::TOWEL, arity: OneToOne },
    RelationType { type_id: 3, name: "remote-tv", trigger_category: cat::REMOTE, responder_category: cat::TV, arity: ManyToMany },
    RelationType { type_id: 4, name: "remote-speaker", trigger_category: cat::REMOTE, responder_category: cat::SPEAKER, arity: ManyToMany },
    RelationType { type_id: 5, name: "knife-fruit", trigger_category: cat::KNIFE, responder_category: cat::FRUIT, arity: ManyToMany },
    RelationType { type_id: 6, name: "faucet-fruit", trigger_category: cat::FAUCET, responder_category: cat::FRUIT, arity: ManyToMany },
    RelationType { type_id: 7, name: "desk-lamp-self", trigger_category: cat::DESK_LAMP, responder_category: cat::DESK_LAMP, arity: OneToOne },
    RelationType { type_id: 8, name: "microwave-self", trigger_category: cat::MICROWAVE, responder_category: cat::MICROWAVE, arity: OneToOne },
    RelationType { type_id: 9, name: "faucet-self", trigger_category: cat::FAUCET, responder_category: cat::FAUCET, arity: OneToOne },
];

pub fn category(id: u32) -> Option<&'static Category> {
    CATEGORIES.iter().find(|c| c.id == id)
}

pub fn category_by_name(name: &str) -> Option<&'static Category> {
    CATEGORIES.iter().find(|c| c.name == name)
}

pub fn relation_type(type_id: u32) -> Option<&'static RelationType> {
    RELATION_TYPES.iter().find(|t| t.type_id == type_id)
}

pub fn relation_type_by_name(name: &str) -> Option<&'static RelationType> {
    RELATION_TYPES.iter().find(|t| t.name == name)
}
