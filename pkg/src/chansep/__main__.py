from chansep.cli import main

raise SystemExit(main())
