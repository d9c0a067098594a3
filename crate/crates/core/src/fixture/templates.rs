//! Sentence templates and cue phrases for the synthetic corpus.
//!
//! Slots: {A} and {B} are persons, {P} and {Q} peoples, {C} a place, {W} a
//! weapon, {G} a god, {O} an office, {T} a trifle.

use crate::store::Level;

pub const PERSONS: &[&str] = &[
    "Alexander", "Cleitus", "Agesilaus", "Caesar", "Pompey", "Pericles", "Themistocles",
    "Lysander", "Sulla", "Marius", "Antony", "Cicero", "Brutus", "Crassus", "Cassius", "Cinna",
    "Clodius", "Milo", "Octavius", "Fabius", "Parmenio", "Philotas", "Callisthenes", "Hephaestion",
    "Aristides", "Cimon", "Alcibiades", "Nicias", "Pelopidas", "Epaminondas", "Sertorius", "Lucullus",
    "Cato", "Labienus", "Dolabella", "Lepidus", "Metellus", "Scipio", "Catulus", "Saturninus",
];

pub const PEOPLES: &[&str] = &[
    "Persians", "Athenians", "Spartans", "Thebans", "Macedonians", "Romans", "Carthaginians",
    "Gauls", "Parthians", "Samnites", "Cimbri", "Teutones", "Thracians", "Scythians", "Illyrians",
    "Corinthians", "Argives", "Numidians", "Armenians", "Egyptians", "Helvetii", "Belgae",
];

pub const PLACES: &[&str] = &[
    "Athens", "Sparta", "Thebes", "Corinth", "Rome", "Capua", "Syracuse", "Babylon", "Susa",
    "Tyre", "Gaza", "Pella", "Maracanda", "Sardis", "Ephesus", "Miletus", "Alexandria", "Brundisium",
    "Praeneste", "Massilia", "Chaeronea", "Pharsalus", "Philippi", "Carrhae", "Mantinea", "Delphi",
];

pub const WEAPONS: &[&str] = &[
    "a spear", "a sword", "a dagger", "a cudgel", "a javelin", "a heavy stone", "his bare hands",
];

pub const GODS: &[&str] = &["Apollo", "Athena", "Zeus", "Artemis", "Dionysus", "Hera", "Poseidon", "Castor"];

pub const OFFICES: &[&str] = &["consul", "praetor", "archon", "general", "tribune", "ephor", "quaestor"];

pub const TRIFLES: &[&str] = &[
    "a horse", "a woman", "a debt", "the seating at dinner", "an old insult", "the division of spoils",
    "a boundary stone", "a slave",
];

pub fn level_templates(level: Level) -> &'static [&'static str] {
    match level {
        Level::Interpersonal => &[
            "{A} quarrelled with {B} over {T} and struck him down with {W}.",
            "{B} insulted {A} at table, and {A} seized {W} and wounded him.",
            "In a private dispute {A} attacked {B} and beat him severely.",
            "{A} met {B} on the road and the two men fought until {B} lay dead.",
            "{B} was stabbed by {A}, who had long nursed a grudge against him.",
            "{A} struck {B} in the face before the tent and drew his blade on him.",
            "{A} waylaid his rival {B} at night and ran him through with {W}.",
            "Angered by {B}, {A} flung {W} at him and killed him on the spot.",
        ],
        Level::Intrasocial => &[
            "The citizens of {C} rose against their magistrates and stoned them in the market place.",
            "The partisans of {A} fought those of {B} in the forum, and many citizens fell.",
            "A mob in {C} dragged the tribune from the rostra and clubbed him to death.",
            "Civil strife broke out in {C}, and the faction of {A} massacred its fellow citizens.",
            "The soldiers mutinied against their own general {A} and cut down his officers.",
            "The popular party of {C} burned the houses of the nobles and slew their kinsmen.",
            "{A} ordered the proscription of his opponents, and citizens of {C} were murdered in the streets.",
            "The slaves of {C} revolted against their masters and killed many households.",
        ],
        Level::Intersocial => &[
            "The {P} made war upon the {Q} and laid waste their country.",
            "{A} led the army of the {P} against the {Q} and routed them in a great battle near {C}.",
            "The fleet of the {P} engaged the ships of the {Q} and sank many of them.",
            "{A} besieged {C}, and when the walls were breached the {P} put the {Q} to the sword.",
            "The {Q} attacked the camp of the {P} by night, and the slaughter was great on both sides.",
            "{A} invaded the land of the {Q} with the forces of the {P}, burning villages and killing their warriors.",
            "The cavalry of the {P} charged the {Q} near {C} and cut them to pieces.",
            "The {P} stormed the fortress of the {Q} and slew its defenders.",
        ],
        Level::Intrapersonal => &[
            "{A} took his own life rather than fall into the hands of his enemies.",
            "{A} fell upon his own sword when he heard that all was lost.",
            "In despair {A} refused all food and starved himself to death.",
            "{A} drank the poison he had kept about him and so died by his own hand.",
            "{A} tried to kill himself in his grief and was restrained only by his friends.",
            "{A} ordered a slave to hold the blade and threw himself upon it.",
        ],
    }
}

/// Violent sections whose wording avoids the usual cues.
pub const SUBTLE: &[&str] = &[
    "{A} was not seen alive again after that night.",
    "Few of the {Q} ever returned to their homes.",
    "{B} was removed by those who feared his influence.",
    "The {P} did not spare the men of {C}.",
    "After this there were many funerals in {C}, and the women mourned.",
    "{A} made an end of {B} quietly, and no one asked where he had gone.",
    "The river near {C} ran red for days afterwards.",
];

/// Non-violent sections with military or political vocabulary.
pub const CONFOUNDERS: &[&str] = &[
    "{A} drilled his soldiers through the winter and kept them from idleness.",
    "The army of the {P} marched to {C} and went into winter quarters without fighting.",
    "{A} made a treaty with the {Q}, and both sides swore oaths before {G}.",
    "{A} reviewed the fleet and praised the rowers for their discipline.",
    "The {P} sent envoys to the {Q} to ask for peace and an exchange of hostages.",
    "Captured shields were hung in the temple of {G} as offerings.",
    "{A} wrote a history of the war against the {Q} in his old age.",
    "The veterans of {A} were given land near {C} and settled there.",
];

pub const FILLER: &[&str] = &[
    "{A} was elected {O} by a large majority.",
    "{A} spent the summer at {C}, where he studied philosophy with {B}.",
    "The people of {C} honored {A} with a statue in the market place.",
    "{A} married the daughter of {B}, a woman of good family.",
    "He dedicated a temple to {G} and held games in honor of the god.",
    "{A} spoke before the assembly about the grain supply.",
    "{B} wrote that {A} was frugal in his habits and slept little.",
    "The harvest that year was plentiful, and prices fell in {C}.",
    "{A} received letters from {B} and answered them at length.",
    "{A} restored the walls of the old theatre at {C}.",
    "Many wondered at the eloquence of {A} in the law courts.",
    "{A} travelled to {C} to consult the oracle of {G}.",
    "He was fond of hunting and of the company of learned men.",
    "{B} praised the generosity of {A} toward his friends.",
    "The senate debated the matter for three days without decision.",
    "{A} lent money to the cities of the {P} at moderate interest.",
    "In his youth {A} was trained in rhetoric and music.",
    "{A} gave a splendid dinner for his friends at {C}.",
    "The envoys of the {Q} brought gifts of gold and horses.",
    "{A} was admired for his patience and his memory.",
    "When {B} fell ill, {A} visited him daily and paid his physicians.",
    "The festival of {G} was celebrated at {C} with processions and choruses.",
];

/// Phrases that report remembered violence inside otherwise quiet sections.
pub const RECOLLECTION: &[&str] = &["Men still spoke of how ", "{B} used to recall how ", "It was remembered that "];

pub fn context_phrase(label: &str) -> Option<&'static str> {
    Some(match label {
        "civilian" => "a quarrel among civilians",
        "jurisdictional" => "a trial before the judges",
        "war/military campaign" => "the long campaign",
        "battle" => "the battle",
        "plunder" => "a plundering raid",
        "ambush" => "an ambush in a narrow pass",
        "conspiracy" => "a secret conspiracy",
        "revolt" => "a revolt",
        "conquest" => "the conquest of the region",
        "naval battle" => "a sea fight",
        "religious" => "a religious festival",
        "institutional" => "a session of the council",
        "sack" => "the sack of the town",
        "single combat" => "a single combat before the lines",
        "siege" => "the siege",
        "regicide" => "a plot against the king",
        "military" => "military operations",
        "entertaining" => "a drinking party",
        "mutiny" => "a mutiny",
        "familicide" => "a dispute within the household",
        "fratricide" => "a feud between brothers",
        "paramilitary" => "a raid by armed bands",
        "assassination" => "an assassination",
        "punishment" => "a public punishment",
        _ => return None,
    })
}

pub fn motive_phrase(label: &str) -> Option<&'static str> {
    Some(match label {
        "political" => "political advantage",
        "tactical/strategical" => "strategic necessity",
        "economical" => "the hope of booty and wealth",
        "following orders" => "the orders of their commander",
        "self-defence" => "the need to defend himself",
        "emotional" => "anger and wounded pride",
        "ambition" => "ambition and desire for power",
        "social" => "rivalry of rank and standing",
        "religious" => "zeal for the gods",
        "other" => "reasons of their own",
        "none/accident" => "mere accident",
        "revenge" => "a desire for revenge",
        _ => return None,
    })
}

pub fn consequence_phrase(label: &str) -> Option<&'static str> {
    Some(match label {
        "campaign" => "a new campaign",
        "conquest" => "the conquest of the land",
        "coronation/inauguration" => "the coronation of a new ruler",
        "exile" => "exile",
        "death" => "death",
        "other" => "other changes",
        "victory" => "victory",
        "bestowing of honors" => "honors bestowed on the victors",
        "issuing of law/decrees" => "new decrees",
        "injury" => "grievous wounds",
        "battle" => "a pitched battle",
        "declaration of war" => "a declaration of war",
        "retreat" => "a retreat",
        "mutiny" => "a mutiny among the troops",
        "sending of envoys" => "the sending of envoys",
        "civil conflict/civil war" => "civil war",
        "tyranny" => "tyranny",
        "capture" => "the capture of prisoners",
        "destruction/devastation" => "devastation",
        "repopulation" => "the resettling of the town",
        "declaration of peace/truce" => "a truce",
        "release of prisoners" => "the release of captives",
        "garrisoning of troops" => "a garrison placed in the town",
        "famine" => "famine",
        "siege" => "a siege",
        "deportation" => "the deportation of the inhabitants",
        "treaty/agreement/pact" => "a treaty",
        "surrender" => "surrender",
        "financial reward" => "rewards of money",
        "seclusion" => "seclusion from public life",
        "plunder" => "plunder",
        "mutilation" => "mutilation",
        "revenge" => "vengeance in turn",
        "execution" => "executions",
        "torture" => "torture",
        "applause" => "the applause of the people",
        "enslavement" => "enslavement of the captives",
        _ => return None,
    })
}

pub const CONTEXT_FRAMES: &[&str] = &["This took place during {}.", "It happened in the course of {}.", "The occasion was {}."];
pub const MOTIVE_FRAMES: &[&str] = &["They were moved by {}.", "The cause was {}.", "It was done out of {}."];
pub const CONSEQUENCE_FRAMES: &[&str] = &["The result was {}.", "It ended in {}.", "What followed was {}."];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Registries, Task};

    #[test]
    fn every_registry_label_has_a_phrase_except_unknown() {
        let regs = Registries::builtin();
        for (task, f) in [
            (Task::Context, context_phrase as fn(&str) -> Option<&'static str>),
            (Task::Motive, motive_phrase),
            (Task::Consequence, consequence_phrase),
        ] {
            for l in regs.get(task).labels() {
                assert_eq!(f(l).is_none(), l == "unknown", "{task} {l}");
            }
        }
    }
}
