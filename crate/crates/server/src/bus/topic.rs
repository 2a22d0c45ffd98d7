//! Topic names and wildcard filters.
//!
//! Levels are separated by `/`. In a filter `+` stands for exactly one level
//! and `#` for any number of trailing levels (including none); both must
//! occupy a whole level and `#` must be last. Names carry no wildcards.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopicError {
    #[error("empty topic")]
    Empty,
    #[error("empty level in `{0}`")]
    EmptyLevel(String),
    #[error("`#` must be the last level in `{0}`")]
    HashNotLast(String),
    #[error("wildcard inside a level in `{0}`")]
    PartialWildcard(String),
    #[error("wildcard in topic name `{0}`")]
    WildcardInName(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Level {
    Exact(String),
    One,
    Rest,
}

/// A validated subscription filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    text: String,
    levels: Vec<Level>,
}

impl Filter {
    pub fn parse(text: &str) -> Result<Filter, TopicError> {
        if text.is_empty() {
            return Err(TopicError::Empty);
        }
        let parts: Vec<&str> = text.split('/').collect();
        let mut levels = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let level = match *part {
                "" => return Err(TopicError::EmptyLevel(text.into())),
                "+" => Level::One,
                "#" if i + 1 == parts.len() => Level::Rest,
                "#" => return Err(TopicError::HashNotLast(text.into())),
                p if p.contains(['+', '#']) => return Err(TopicError::PartialWildcard(text.into())),
                p => Level::Exact(p.into()),
            };
            levels.push(level);
        }
        Ok(Filter { text: text.into(), levels })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, topic: &str) -> bool {
        let mut names = topic.split('/');
        for level in &self.levels {
            match level {
                Level::Rest => return true,
                Level::One => {
                    if names.next().is_none() {
                        return false;
                    }
                }
                Level::Exact(want) => {
                    if names.next() != Some(want.as_str()) {
                        return false;
                    }
                }
            }
        }
        names.next().is_none()
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Checks a concrete topic name.
pub fn validate_topic(topic: &str) -> Result<(), TopicError> {
    if topic.is_empty() {
        return Err(TopicError::Empty);
    }
    if topic.contains(['+', '#']) {
        return Err(TopicError::WildcardInName(topic.into()));
    }
    if topic.split('/').any(str::is_empty) {
        return Err(TopicError::EmptyLevel(topic.into()));
    }
    Ok(())
}

/// Convenience for one-off checks: true when `filter` is valid and matches.
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    Filter::parse(filter).is_ok_and(|f| f.matches(topic))
}
