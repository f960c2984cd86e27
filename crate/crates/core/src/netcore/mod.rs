//! Attributed heterogeneous social networks and their alignment.
//!
//! A [`HeterogeneousNetwork`] holds users, posts, directed follow links,
//! authorship (write) links and the attribute tokens attached to each post.
//! Attributes live in three namespaces (words, time buckets, locations) and
//! behave as categorical attribute nodes reached through `have` links.
//!
//! Networks are immutable once built; use [`NetworkBuilder`] or the
//! `edge-list-v1` loader in [`io`] to construct one.

pub mod io;
mod sample;
mod transition;

use std::collections::{HashMap, HashSet};

pub use sample::sample_network;
pub use transition::{build_transition_matrix, TransitionMatrix};

use crate::error::{Error, Result};

/// Attribute namespaces a post can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttrKind {
    Word,
    Time,
    Location,
}

impl AttrKind {
    pub const ALL: [AttrKind; 3] = [AttrKind::Word, AttrKind::Time, AttrKind::Location];
}

/// How raw timestamps are mapped onto categorical time attribute nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeBucketing {
    /// Hour of the week, 168 buckets.
    #[default]
    HourOfWeek,
    /// Fixed-width buckets of the given number of seconds.
    Fixed { width_secs: i64 },
}

impl TimeBucketing {
    pub fn bucket(self, timestamp: i64) -> u32 {
        match self {
            TimeBucketing::HourOfWeek => timestamp.div_euclid(3600).rem_euclid(168) as u32,
            TimeBucketing::Fixed { width_secs } => {
                timestamp.div_euclid(width_secs.max(1)) as u32
            }
        }
    }
}

/// String-interned ids with dense indices in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    /// Returns the index of `name`, inserting it if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    /// Inserts a fresh name; `None` if it already existed.
    pub fn insert_new(&mut self, name: &str) -> Option<usize> {
        if self.index.contains_key(name) {
            return None;
        }
        Some(self.intern(name))
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Attribute tokens attached to one post. Each list is a set, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PostAttrs {
    /// Indices into the network's word vocabulary.
    pub words: Vec<usize>,
    /// Raw timestamps in seconds, as ingested.
    pub timestamps: Vec<i64>,
    /// Indices into the network's location vocabulary.
    pub locations: Vec<usize>,
}

/// An attributed heterogeneous social network `G = (V, E, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeterogeneousNetwork {
    users: Interner,
    posts: Interner,
    post_author: Vec<usize>,
    follows: Vec<(usize, usize)>,
    post_attrs: Vec<PostAttrs>,
    words: Interner,
    locations: Interner,
    bucketing: TimeBucketing,
}

impl HeterogeneousNetwork {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_posts(&self) -> usize {
        self.posts.len()
    }

    pub fn users(&self) -> &Interner {
        &self.users
    }

    pub fn posts(&self) -> &Interner {
        &self.posts
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.users.get(id)
    }

    pub fn user_id(&self, index: usize) -> &str {
        self.users.name(index)
    }

    /// Directed follow links `u -> v` in insertion order.
    pub fn follows(&self) -> &[(usize, usize)] {
        &self.follows
    }

    /// Authoring user of each post.
    pub fn post_authors(&self) -> &[usize] {
        &self.post_author
    }

    pub fn post_attrs(&self) -> &[PostAttrs] {
        &self.post_attrs
    }

    pub fn words(&self) -> &Interner {
        &self.words
    }

    pub fn locations(&self) -> &Interner {
        &self.locations
    }

    pub fn time_bucketing(&self) -> TimeBucketing {
        self.bucketing
    }

    pub fn follow_set(&self) -> HashSet<(usize, usize)> {
        self.follows.iter().copied().collect()
    }

    /// Attribute-node incidences of each post for `kind`, as `(post, attr)`
    /// pairs, plus the number of distinct attribute nodes.
    pub fn have_links(&self, kind: AttrKind) -> (Vec<(usize, usize)>, usize) {
        let mut out = Vec::new();
        match kind {
            AttrKind::Word => {
                for (p, a) in self.post_attrs.iter().enumerate() {
                    out.extend(a.words.iter().map(|&w| (p, w)));
                }
                (out, self.words.len())
            }
            AttrKind::Location => {
                for (p, a) in self.post_attrs.iter().enumerate() {
                    out.extend(a.locations.iter().map(|&l| (p, l)));
                }
                (out, self.locations.len())
            }
            AttrKind::Time => {
                let mut buckets: HashMap<u32, usize> = HashMap::new();
                for (p, a) in self.post_attrs.iter().enumerate() {
                    let mut seen: Vec<usize> = a
                        .timestamps
                        .iter()
                        .map(|&t| {
                            let next = buckets.len();
                            *buckets.entry(self.bucketing.bucket(t)).or_insert(next)
                        })
                        .collect();
                    seen.sort_unstable();
                    seen.dedup();
                    out.extend(seen.into_iter().map(|b| (p, b)));
                }
                (out, buckets.len())
            }
        }
    }

    /// Copy of the network with the given follow edges removed.
    pub fn without_follows(&self, removed: &HashSet<(usize, usize)>) -> Self {
        let mut out = self.clone();
        out.follows.retain(|e| !removed.contains(e));
        out
    }

    /// Copy of the network keeping only the posts whose index is in `keep`
    /// (sorted ascending). Post ids are preserved.
    pub(crate) fn with_posts(&self, keep: &[usize]) -> Self {
        let mut posts = Interner::default();
        let mut post_author = Vec::with_capacity(keep.len());
        let mut post_attrs = Vec::with_capacity(keep.len());
        for &p in keep {
            posts.intern(self.posts.name(p));
            post_author.push(self.post_author[p]);
            post_attrs.push(self.post_attrs[p].clone());
        }
        HeterogeneousNetwork {
            posts,
            post_author,
            post_attrs,
            ..self.clone()
        }
    }

    pub(crate) fn with_follows(&self, follows: Vec<(usize, usize)>) -> Self {
        HeterogeneousNetwork {
            follows,
            ..self.clone()
        }
    }
}

/// Incremental, validating constructor for [`HeterogeneousNetwork`].
///
/// The `line` argument on each method is only used to label errors; pass 0
/// when building programmatically.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    users: Interner,
    posts: Interner,
    post_author: Vec<usize>,
    follows: Vec<(usize, usize)>,
    follow_set: HashSet<(usize, usize)>,
    post_attrs: Vec<PostAttrs>,
    words: Interner,
    locations: Interner,
    bucketing: TimeBucketing,
}

impl NetworkBuilder {
    pub fn new(bucketing: TimeBucketing) -> Self {
        NetworkBuilder {
            bucketing,
            ..Default::default()
        }
    }

    pub fn add_user(&mut self, id: &str, line: usize) -> Result<usize> {
        self.users.insert_new(id).ok_or_else(|| Error::DuplicateNode {
            line,
            kind: "user",
            id: id.to_owned(),
        })
    }

    pub fn add_post(&mut self, id: &str, author: &str, line: usize) -> Result<usize> {
        let author = self.user(author, line)?;
        let p = self.posts.insert_new(id).ok_or_else(|| Error::DuplicateNode {
            line,
            kind: "post",
            id: id.to_owned(),
        })?;
        self.post_author.push(author);
        self.post_attrs.push(PostAttrs::default());
        Ok(p)
    }

    pub fn add_follow(&mut self, from: &str, to: &str, line: usize) -> Result<()> {
        let u = self.user(from, line)?;
        let v = self.user(to, line)?;
        if u == v {
            return Err(Error::SelfLoop {
                line,
                id: from.to_owned(),
            });
        }
        if !self.follow_set.insert((u, v)) {
            return Err(Error::DuplicateEdge {
                line,
                from: from.to_owned(),
                to: to.to_owned(),
            });
        }
        self.follows.push((u, v));
        Ok(())
    }

    pub fn add_word(&mut self, post: &str, word: &str, line: usize) -> Result<()> {
        let p = self.post(post, line)?;
        let w = self.words.intern(word);
        insert_sorted(&mut self.post_attrs[p].words, w);
        Ok(())
    }

    pub fn add_timestamp(&mut self, post: &str, secs: i64, line: usize) -> Result<()> {
        let p = self.post(post, line)?;
        insert_sorted(&mut self.post_attrs[p].timestamps, secs);
        Ok(())
    }

    pub fn add_location(&mut self, post: &str, location: &str, line: usize) -> Result<()> {
        let p = self.post(post, line)?;
        let l = self.locations.intern(location);
        insert_sorted(&mut self.post_attrs[p].locations, l);
        Ok(())
    }

    pub fn build(self) -> HeterogeneousNetwork {
        HeterogeneousNetwork {
            users: self.users,
            posts: self.posts,
            post_author: self.post_author,
            follows: self.follows,
            post_attrs: self.post_attrs,
            words: self.words,
            locations: self.locations,
            bucketing: self.bucketing,
        }
    }

    fn user(&self, id: &str, line: usize) -> Result<usize> {
        self.users.get(id).ok_or_else(|| Error::DanglingReference {
            line,
            kind: "user",
            id: id.to_owned(),
        })
    }

    fn post(&self, id: &str, line: usize) -> Result<usize> {
        self.posts.get(id).ok_or_else(|| Error::DanglingReference {
            line,
            kind: "post",
            id: id.to_owned(),
        })
    }
}

fn insert_sorted<T: Ord>(v: &mut Vec<T>, x: T) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

/// Two networks joined by anchor links `A^(1,2)`.
///
/// `emerging` is the sparse target network, `mature` the information-rich
/// partner. Anchors are `(emerging user, mature user)` index pairs forming a
/// partial one-to-one matching.
#[derive(Clone, Debug)]
pub struct AlignedPair {
    pub emerging: HeterogeneousNetwork,
    pub mature: HeterogeneousNetwork,
    anchors: Vec<(usize, usize)>,
}

impl AlignedPair {
    pub fn new(
        emerging: HeterogeneousNetwork,
        mature: HeterogeneousNetwork,
        anchors: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut left = vec![false; emerging.n_users()];
        let mut right = vec![false; mature.n_users()];
        for &(i, j) in &anchors {
            if i >= left.len() {
                return Err(Error::UnknownUser {
                    side: "emerging",
                    id: i.to_string(),
                });
            }
            if j >= right.len() {
                return Err(Error::UnknownUser {
                    side: "mature",
                    id: j.to_string(),
                });
            }
            if std::mem::replace(&mut left[i], true) {
                return Err(Error::NonInjectiveAnchor {
                    side: "emerging",
                    id: emerging.user_id(i).to_owned(),
                });
            }
            if std::mem::replace(&mut right[j], true) {
                return Err(Error::NonInjectiveAnchor {
                    side: "mature",
                    id: mature.user_id(j).to_owned(),
                });
            }
        }
        Ok(AlignedPair {
            emerging,
            mature,
            anchors,
        })
    }

    pub fn anchors(&self) -> &[(usize, usize)] {
        &self.anchors
    }

    /// Same anchors, different emerging network (users must be unchanged).
    pub fn with_emerging(&self, emerging: HeterogeneousNetwork) -> Self {
        assert_eq!(emerging.n_users(), self.emerging.n_users());
        AlignedPair {
            emerging,
            mature: self.mature.clone(),
            anchors: self.anchors.clone(),
        }
    }
}
