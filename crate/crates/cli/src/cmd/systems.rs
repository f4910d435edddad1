use flowbox_core::dynsys::BUILTINS;
use flowbox_core::refsol::REFERENCE_IDS;

/// Registry rows whose name contains `filter`.
pub fn table(filter: &str) -> String {
    let mut out = format!("{:<14} {:>3}  {:<10} {:<30} {}\n", "name", "dim", "closed-form", "surface", "description");
    for b in BUILTINS.iter().filter(|b| b.name.contains(filter)) {
        let surface = if b.recurrent {
            "no non-recurrent surface"
        } else {
            "default surface available"
        };
        let closed = if REFERENCE_IDS.contains(&b.name) { "yes" } else { "no" };
        out.push_str(&format!(
            "{:<14} {:>3}  {:<10} {:<30} {}\n",
            b.name, b.dim, closed, surface, b.description
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_marked() {
        let t = table("");
        assert!(t.lines().count() > 8);
        let rot = t.lines().find(|l| l.starts_with("rotation-c")).unwrap();
        assert!(rot.contains("no non-recurrent surface"));
        assert_eq!(table("nothing-matches").lines().count(), 1);
    }
}
