fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
    let mut config = cbindgen::Config::default();
    config.enumeration.prefix_with_name = true;
    config.enumeration.rename_variants = cbindgen::RenameRule::ScreamingSnakeCase;
    cbindgen::Builder::new()
        .with_config(config)
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("HENON_RADIAL_H")
        .with_cpp_compat(true)
        .with_documentation(true)
        .generate()
        .expect("cbindgen failed")
        .write_to_file(format!("{crate_dir}/include/henon_radial.h"));
}
