from deadline_ils.cli import main

raise SystemExit(main())
