from heurepo.cli import main

raise SystemExit(main())
