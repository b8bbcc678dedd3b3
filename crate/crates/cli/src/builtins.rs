//! Scenarios compiled into the binary.

const BUILTINS: [(&str, &str); 3] = [
    ("empty", include_str!("../scenarios/builtin/empty.toml")),
    ("exit_law_quick", include_str!("../scenarios/builtin/exit_law_quick.toml")),
    ("wv_local_is_one", include_str!("../scenarios/builtin/wv_local_is_one.toml")),
];

/// Names of the built-in scenarios.
pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// Text of a built-in scenario.
pub fn get(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use crate::config::Scenario;

    #[test]
    fn builtins_parse_and_validate() {
        for name in super::names() {
            let sc = Scenario::parse(super::get(name).unwrap()).unwrap();
            assert_eq!(sc.id, name);
            sc.validate().unwrap();
        }
    }
}
