//! One-off golden file generator; run explicitly, then inspect the output.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use vnpaas_core::experiment::{split_placement, split_template};
use vnpaas_core::orchestrator::decompose;

#[test]
#[ignore]
fn generate_golden_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("golden");
    fs::create_dir_all(&dir).unwrap();

    let template = split_template();
    fs::write(dir.join("hssaas.toml"), template.serialize()).unwrap();

    let placement = split_placement();
    let placement_text = "zones = [\"zone-1\", \"zone-2\"]\n\n[assignments]\nCx = \"zone-2\"\nS6a = \"zone-1\"\nUDR = \"zone-1\"\n";
    fs::write(dir.join("hssaas-placement.toml"), placement_text).unwrap();

    let zones: BTreeSet<String> = ["zone-1", "zone-2"].iter().map(|s| s.to_string()).collect();
    let plan = decompose(&template, &placement, &zones).unwrap();
    fs::write(dir.join("hssaas-plan.toml"), plan.serialize()).unwrap();
    for (zone, subservice) in &plan.subservices {
        fs::write(dir.join(format!("hssaas-{zone}.toml")), subservice.serialize()).unwrap();
    }
    println!("golden files written to {}", dir.display());
}
