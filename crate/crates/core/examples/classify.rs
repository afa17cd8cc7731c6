//! Classify the built-in models by delay type.

use ddae::models::{builtin_models, Structure};

fn main() -> ddae::Result<()> {
    for entry in builtin_models() {
        let built = entry.build(&[])?;
        let kind = match (&built.structure, &built.simulation) {
            (_, Some(m)) => format!("{:?}", ddae::ddae::classify(m.as_ref())),
            (Structure::Pencil(_), None) => "pencil only".to_string(),
            (Structure::Lti(_), None) => "descriptor subsystem".to_string(),
            _ => "not simulated".to_string(),
        };
        println!("{:<20} {kind}", entry.name);
    }
    Ok(())
}
