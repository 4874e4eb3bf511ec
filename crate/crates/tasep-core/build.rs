fn main() {
    // ndarray-linalg is used without a bundled LAPACK backend; link the
    // system OpenBLAS (provides both BLAS and LAPACK symbols).
    println!("cargo:rustc-link-lib=dylib=openblas");
}
