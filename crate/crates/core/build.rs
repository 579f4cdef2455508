// Link the system OpenBLAS (which bundles LAPACK) for ndarray-linalg's
// backend-less mode, instead of building one through openblas-src.
fn main() {
    let candidates = [
        "/usr/lib/x86_64-linux-gnu/openblas-pthread",
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib64",
        "/usr/lib",
    ];
    for dir in candidates {
        if std::path::Path::new(dir).join("libopenblas.so").exists() {
            println!("cargo:rustc-link-search=native={dir}");
            break;
        }
    }
    println!("cargo:rustc-link-lib=dylib=openblas");
}
