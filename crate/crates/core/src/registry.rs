//! Name-keyed registries of interchangeable strategies.

use std::collections::BTreeMap;

use crate::error::{IfrError, Result};

type Factory<T> = Box<dyn Fn(&str) -> Result<Box<T>> + Send + Sync>;

/// Maps names to factories producing trait objects. A lookup key may carry
/// an argument after a colon (`"combined:0.8"`); the factory receives the
/// text after the colon, or an empty string.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&str) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, key: &str) -> Result<Box<T>> {
        let (name, arg) = key.split_once(':').unwrap_or((key, ""));
        let f = self.entries.get(name).ok_or_else(|| IfrError::Unknown {
            kind: self.kind,
            name: key.to_string(),
        })?;
        f(arg)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

/// Parses an optional numeric argument, falling back to `default`.
pub fn parse_arg(kind: &'static str, arg: &str, default: f64) -> Result<f64> {
    if arg.is_empty() {
        return Ok(default);
    }
    arg.parse::<f64>().map_err(|_| IfrError::Unknown {
        kind,
        name: arg.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Hello(String);

    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello{}", self.0)
        }
    }

    #[test]
    fn create_by_name_with_argument() {
        let mut r: Registry<dyn Greeter> = Registry::new("greeter");
        r.register("hello", |arg| Ok(Box::new(Hello(arg.to_string()))));
        assert_eq!(r.create("hello").unwrap().greet(), "hello");
        assert_eq!(r.create("hello:!").unwrap().greet(), "hello!");
        assert!(matches!(r.create("bye"), Err(IfrError::Unknown { .. })));
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["hello"]);
    }
}
