// Runs every example end to end so they cannot rot.

mod histogram_binning {
    include!("../examples/histogram_binning.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod linear_scaling {
    include!("../examples/linear_scaling.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod group_regression {
    include!("../examples/group_regression.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod ighb {
    include!("../examples/ighb.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod iglb {
    include!("../examples/iglb.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod scoring {
    include!("../examples/scoring.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod grouping {
    include!("../examples/grouping.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod metrics_report {
    include!("../examples/metrics_report.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod benchmark {
    include!("../examples/benchmark.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod model_io {
    include!("../examples/model_io.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}
