use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::synth::{render_glyph, GlyphStyle};
use super::{Dataset, Membership};
use crate::error::{Error, Result};
use crate::seed;

/// Membership labels of the evaluation set, kept apart from the ids handed to
/// attacks. Only the evaluating harness should open it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SealedLabels {
    labels: HashMap<u64, Membership>,
}

impl SealedLabels {
    pub fn reveal(&self, id: u64) -> Option<Membership> {
        self.labels.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipSplit {
    pub train_ids: Vec<u64>,
    pub holdout_ids: Vec<u64>,
    /// Shuffled mix of members and nonmembers.
    pub eval_ids: Vec<u64>,
    labels: SealedLabels,
}

impl MembershipSplit {
    pub fn labels(&self) -> &SealedLabels {
        &self.labels
    }

    fn eval_with(&self, label: Membership) -> Vec<u64> {
        self.eval_ids
            .iter()
            .copied()
            .filter(|&id| self.labels.reveal(id) == Some(label))
            .collect()
    }

    pub fn eval_members(&self) -> Vec<u64> {
        self.eval_with(Membership::Member)
    }

    pub fn eval_nonmembers(&self) -> Vec<u64> {
        self.eval_with(Membership::Nonmember)
    }
}

/// Random partition into `train_count` training ids and the holdout rest, with
/// `eval_members` training and `eval_nonmembers` holdout ids drawn for
/// evaluation.
pub fn make_split(
    dataset: &Dataset,
    train_count: usize,
    eval_members: usize,
    eval_nonmembers: usize,
    seed: u64,
) -> Result<MembershipSplit> {
    let n = dataset.len();
    if train_count == 0 || train_count >= n {
        return Err(Error::InfeasibleSplit(format!(
            "train_count {train_count} leaves no members or no nonmembers among {n} instances"
        )));
    }
    if eval_members > train_count || eval_nonmembers > n - train_count {
        return Err(Error::InfeasibleSplit(format!(
            "eval {eval_members}+{eval_nonmembers} does not fit train {train_count} / holdout {}",
            n - train_count
        )));
    }
    let mut rng = seed::rng_for(seed, "datalab/split", 0);
    let mut ids = dataset.ids().to_vec();
    ids.shuffle(&mut rng);
    let holdout_ids = ids.split_off(train_count);
    let train_ids = ids;
    build_split(train_ids, holdout_ids, eval_members, eval_nonmembers, &mut rng)
}

fn build_split<R: Rng>(
    train_ids: Vec<u64>,
    holdout_ids: Vec<u64>,
    eval_members: usize,
    eval_nonmembers: usize,
    rng: &mut R,
) -> Result<MembershipSplit> {
    let mut labels = HashMap::new();
    let mut eval_ids = Vec::with_capacity(eval_members + eval_nonmembers);
    for &id in train_ids.choose_multiple(rng, eval_members) {
        labels.insert(id, Membership::Member);
        eval_ids.push(id);
    }
    for &id in holdout_ids.choose_multiple(rng, eval_nonmembers) {
        labels.insert(id, Membership::Nonmember);
        eval_ids.push(id);
    }
    eval_ids.shuffle(rng);
    Ok(MembershipSplit {
        train_ids,
        holdout_ids,
        eval_ids,
        labels: SealedLabels { labels },
    })
}

/// `n` instances that are known to share one membership label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoAttackGroup {
    pub member_ids: Vec<u64>,
    pub shared_label: Membership,
}

impl CoAttackGroup {
    pub fn n(&self) -> usize {
        self.member_ids.len()
    }
}

/// Randomly partitions each label class of the evaluation set into groups of
/// exactly `n`. Leftovers that do not fill a group are dropped with a warning.
pub fn group_eval(split: &MembershipSplit, n: usize, seed: u64) -> Result<Vec<CoAttackGroup>> {
    if n == 0 {
        return Err(Error::InvalidArgument("group size must be at least 1".into()));
    }
    let mut rng = seed::rng_for(seed, "datalab/groups", n as u64);
    let mut groups = Vec::new();
    for label in [Membership::Member, Membership::Nonmember] {
        let mut ids = split.eval_with(label);
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let dropped = ids.len() % n;
        if dropped > 0 {
            log::warn!("group size {n}: dropping {dropped} {label} instances");
        }
        groups.extend(ids.chunks_exact(n).map(|c| CoAttackGroup {
            member_ids: c.to_vec(),
            shared_label: label,
        }));
    }
    Ok(groups)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContributorSpec {
    pub num_users: usize,
    pub images_per_user: usize,
    pub contributing_fraction: f64,
    pub glyph_size: usize,
    /// How many of a user's images form their evaluation group; all of them
    /// when `None`. Every image of a contributing user is trained on.
    pub eval_images_per_user: Option<usize>,
    /// Per-image variation around the user's own writing style.
    pub style_noise: f64,
    pub pixel_noise: f64,
}

impl Default for ContributorSpec {
    fn default() -> Self {
        ContributorSpec {
            num_users: 40,
            images_per_user: 10,
            contributing_fraction: 0.5,
            glyph_size: 8,
            eval_images_per_user: None,
            style_noise: 0.03,
            pixel_noise: 0.03,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContributorSim {
    /// Contributor id is the user index.
    pub dataset: Dataset,
    pub split: MembershipSplit,
    /// One group per user, in user order.
    pub groups: Vec<CoAttackGroup>,
}

/// Users that each write one digit in their own style several times. A
/// `contributing_fraction` of the users hand all their images to training.
pub fn simulate_contributors(spec: &ContributorSpec, seed: u64) -> Result<ContributorSim> {
    let (users, per_user) = (spec.num_users, spec.images_per_user);
    if users == 0 || per_user == 0 || spec.glyph_size < 6 {
        return Err(Error::InvalidArgument(
            "need at least one user and image, and glyph_size ≥ 6".into(),
        ));
    }
    let strength = spec.eval_images_per_user.unwrap_or(per_user);
    if strength == 0 || strength > per_user {
        return Err(Error::InvalidArgument(format!(
            "eval_images_per_user {strength} must be in 1..={per_user}"
        )));
    }
    let contributing = (spec.contributing_fraction * users as f64).round() as usize;
    if contributing == 0 || contributing >= users {
        return Err(Error::InfeasibleSplit(format!(
            "{contributing} of {users} users contributing leaves a label class empty"
        )));
    }

    let mut rng = seed::rng_for(seed, "datalab/contributors", 0);
    let mut rows = Vec::with_capacity(users * per_user);
    let mut owners = Vec::with_capacity(users * per_user);
    let mut classes = Vec::with_capacity(users * per_user);
    for u in 0..users {
        let class = rng.gen_range(0..10u8);
        let style = GlyphStyle::random(class, &mut rng);
        for _ in 0..per_user {
            let own = style.perturbed(spec.style_noise, &mut rng);
            rows.push(render_glyph(&own, spec.glyph_size, spec.pixel_noise, &mut rng));
            owners.push(u as u32);
            classes.push(class);
        }
    }
    let dataset = Dataset::new(rows)?.with_contributors(owners)?.with_classes(classes)?;

    let mut order: Vec<usize> = (0..users).collect();
    order.shuffle(&mut rng);
    let mut member = vec![false; users];
    order[..contributing].iter().for_each(|&u| member[u] = true);

    let user_ids = |u: usize| (u * per_user) as u64..((u + 1) * per_user) as u64;
    let (mut train_ids, mut holdout_ids) = (Vec::new(), Vec::new());
    let mut labels = HashMap::new();
    let mut eval_ids = Vec::new();
    let mut groups = Vec::with_capacity(users);
    for u in 0..users {
        let label = if member[u] { Membership::Member } else { Membership::Nonmember };
        if member[u] { &mut train_ids } else { &mut holdout_ids }.extend(user_ids(u));
        let picked: Vec<u64> = user_ids(u).take(strength).collect();
        for &id in &picked {
            labels.insert(id, label);
        }
        eval_ids.extend_from_slice(&picked);
        groups.push(CoAttackGroup {
            member_ids: picked,
            shared_label: label,
        });
    }
    eval_ids.shuffle(&mut rng);
    Ok(ContributorSim {
        dataset,
        split: MembershipSplit {
            train_ids,
            holdout_ids,
            eval_ids,
            labels: SealedLabels { labels },
        },
        groups,
    })
}
