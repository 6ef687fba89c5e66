use std::path::PathBuf;

fn main() {
    let out = PathBuf::from(std::env::var_os("OUT_DIR").unwrap());
    for name in ["linalg", "simd"] {
        let path = format!("specs/{name}.xml");
        println!("cargo:rerun-if-changed={path}");
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
        let spec = dslgen::parse_spec(&text, &dslgen::ParseOptions::default())
            .unwrap_or_else(|e| panic!("{path}:\n{e}"));
        dslgen::emit(&dslgen::generate(&spec), &out.join(name)).unwrap_or_else(|e| panic!("{e}"));
    }
}
