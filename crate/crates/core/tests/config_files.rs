use std::path::PathBuf;

use condmem::reproduce::paper_config;
use condmem::RunConfig;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn paper_config_file_matches_builtin() {
    let cfg = RunConfig::from_file(&shipped("paper.conf")).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg, paper_config());
    assert_eq!(cfg.hash(), paper_config().hash());
}

#[test]
fn written_config_reads_back() {
    let cfg = paper_config();
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
}
