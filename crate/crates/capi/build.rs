use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();
    let out_dir = PathBuf::from(env::var("OUT_DIR").unwrap());

    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cbindgen::Config::from_file(
            PathBuf::from(&crate_dir).join("cbindgen.toml"),
        ).expect("cbindgen.toml"))
        .generate()
        .expect("unable to generate C bindings");

    // the header ships with the crate and is also staged into OUT_DIR so
    // tests can assert on the generated surface
    bindings.write_to_file(PathBuf::from(&crate_dir).join("include/quasidiff.h"));
    bindings.write_to_file(out_dir.join("quasidiff.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
