use wavefront::cli::config;

#[test]
fn shipped_scenarios_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let s = config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            s.model_spec().unwrap();
            s.grid().unwrap();
            s.check_width().unwrap();
            n += 1;
        }
    }
    assert!(n >= 5);
}
