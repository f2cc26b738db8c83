use crate::ids::{Handle, PartyId};
use crate::world::{Caller, ErrorFunction, Field, Functionality, Reality};

/// Bulletin board that only accepts posts from currently infectious parties.
#[derive(Debug, Default)]
pub struct BulletinBoard {
    items: Vec<Handle>,
}

impl BulletinBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, party: &PartyId, item: Handle, reality: &Reality) -> bool {
        let infectious = reality
            .my_current_meas(
                &Caller::Functionality(Functionality::BulletinBoard),
                party,
                &[Field::Infected],
                &ErrorFunction::Identity,
            )
            .is_ok_and(|m| m.infected == Some(true));
        if infectious {
            self.items.push(item);
        }
        infectious
    }

    pub fn retrieve(&self) -> Vec<Handle> {
        self.items.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::RealityRecord;

    fn world() -> Reality {
        let mut w = Reality::default();
        let mut sick = RealityRecord::empty("sick".into(), 0);
        sick.infected = Some(true);
        w.input(sick, 0).unwrap();
        w.input(RealityRecord::empty("well".into(), 0), 0).unwrap();
        w
    }

    #[test]
    fn only_infectious_posts() {
        let w = world();
        let mut tbb = BulletinBoard::new();
        assert!(tbb.retrieve().is_empty());
        assert!(tbb.add(&"sick".into(), Handle(1), &w));
        assert!(!tbb.add(&"well".into(), Handle(2), &w));
        assert!(!tbb.add(&"ghost".into(), Handle(3), &w));
        assert_eq!(tbb.retrieve(), vec![Handle(1)]);
    }
}
