fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    cbindgen::generate(&crate_dir)
        .expect("header generation failed")
        .write_to_file(std::path::Path::new(&crate_dir).join("include/egovqa.h"));
}
